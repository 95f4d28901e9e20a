//! Clones the synthetic corpus, selects projects with enough history and
//! prints per-project activity statistics.
//!
//!     cargo run --example ingest_history

use weaknessminer::ingest;
use weaknessminer::{pipeline, synth};

fn main() -> weaknessminer::Result<()> {
    let dir = std::env::temp_dir().join("weaknessminer-ingest");
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    let corpus = synth::build_corpus(&dir.join("corpus"))?;
    let out = dir.join("ingest");
    let summary = pipeline::stage_ingest(
        &corpus.manifest,
        &dir.join("repos"),
        &out,
        synth::MIN_COMMITS,
        2,
    )?;
    println!("selected {:?}", summary.selected);
    println!("too few commits {:?}", summary.excluded_too_few_commits);

    let projects = pipeline::load_projects(&out)?;
    let histories = pipeline::load_histories(&out, &projects)?;
    for p in &projects {
        let stats = ingest::compute_project_stats(&histories[&p.id])?;
        println!(
            "{:<8} {:<8} commits={:<3} authors={} size={}B active={:.2} months F_com={:.2}",
            p.id,
            p.category.map_or("-", |c| c.as_str()),
            stats.n_com,
            p.author_count,
            p.size_bytes,
            stats.d_act_months,
            stats.f_com
        );
    }
    Ok(())
}
