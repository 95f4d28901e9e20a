//! Builds the synthetic corpus in a temporary directory, runs every stage
//! from a generated config and prints the funnel plus the audit verdict.
//!
//!     cargo run --example full_pipeline [-- <scratch dir>]

use std::path::PathBuf;

use weaknessminer::config::PipelineConfig;
use weaknessminer::cwe_catalog::{default_stopwords, Catalog};
use weaknessminer::{pipeline, synth};

fn main() -> weaknessminer::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("weaknessminer-demo"));
    if root.exists() {
        std::fs::remove_dir_all(&root)?;
    }
    let corpus = synth::build_corpus(&root)?;
    let stubs = synth::write_stub_vectors(
        &corpus,
        &Catalog::builtin(),
        &default_stopwords(),
        &root.join("vectors"),
        7,
    )?;
    let config = synth::write_config(&corpus, &stubs, &root.join("workspace"), 4)?;

    let cfg = PipelineConfig::load(&config)?;
    let run = pipeline::run_pipeline(&cfg, false)?;
    println!("{}", serde_json::to_string_pretty(&run.funnel)?);

    let audit = pipeline::audit(&cfg.workspace.dir)?;
    for c in &audit.checks {
        println!(
            "{:<5} {:<40} {}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!(
        "report tables in {}",
        cfg.workspace.dir.join("report").display()
    );
    Ok(())
}
