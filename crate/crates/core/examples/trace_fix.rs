//! Builds a tiny repository in which one commit introduces a bad check and a
//! later commit fixes it, then traces the fix back to its origin.
//!
//!     cargo run --example trace_fix

use weaknessminer::ingest::{self, ProjectRecord};
use weaknessminer::synth::{source_lines, RepoBuilder, ANN, BOB};
use weaknessminer::szz::{self, SzzConfig};

fn main() -> weaknessminer::Result<()> {
    let dir = std::env::temp_dir().join("weaknessminer-trace");
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    let mut lines = source_lines("grip", 6);
    let repo = RepoBuilder::init(&dir)?;
    repo.write("src/Grip.cs", &lines)?;
    repo.commit(ANN, 0, "initial import")?;
    lines[2] = "if (force > limit) { release(); }".into();
    repo.write("src/Grip.cs", &lines)?;
    let origin = repo.commit(BOB, 4, "tune grip release")?;
    lines[2] = "if (force >= limit) { release(); clamp(); }".into();
    repo.write("src/Grip.cs", &lines)?;
    let fix = repo.commit(ANN, 9, "fix bug in grip release bounds")?;

    let project = ProjectRecord::new("demo", dir.display().to_string(), dir.clone());
    let commits = ingest::extract_commits(&project)?;
    let wfc = commits
        .iter()
        .find(|c| c.hash == fix)
        .expect("fix is in history");
    let chain = szz::trace("demo", wfc, &dir, &SzzConfig::default());
    println!("fix    {}", &fix[..12]);
    println!("origin {}", &origin[..12]);
    for w in &chain.wccs {
        println!("  blamed {} at {}", &w.hash[..12], w.authored_at);
    }
    assert!(chain.contains(&origin));
    Ok(())
}
