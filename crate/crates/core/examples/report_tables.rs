//! Runs the pipeline on the synthetic corpus and prints the analytics
//! tables grouped by project category with years keyed on the first fix.
//!
//!     cargo run --example report_tables

use weaknessminer::analytics::{GroupBy, ReportOptions, YearKey};
use weaknessminer::config::PipelineConfig;
use weaknessminer::cwe_catalog::{default_stopwords, Catalog};
use weaknessminer::{pipeline, synth};

fn main() -> weaknessminer::Result<()> {
    let root = std::env::temp_dir().join("weaknessminer-report");
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
    let cfg = PipelineConfig::load(&synth::write_config(&corpus, &stubs, &root.join("ws"), 2)?)?;
    pipeline::run_pipeline(&cfg, false)?;

    let ws = &cfg.workspace.dir;
    let out = root.join("by-category");
    let bundle = pipeline::stage_report(
        &pipeline::weaknesses_file(&ws.join("weaknesses")),
        &ws.join("ingest"),
        &out,
        ReportOptions {
            group_by: GroupBy::Category,
            year_key: YearKey::T2,
        },
        None,
        None,
    )?;
    for r in &bundle.cwe_distribution {
        println!("{:<9} {}", r.cwe_id, r.count);
    }
    for name in [
        "density.csv",
        "annual_trend.csv",
        "window_summary.csv",
        "developer_status.csv",
    ] {
        println!(
            "\n{name}\n{}",
            std::fs::read_to_string(out.join(name))?.trim_end()
        );
    }
    Ok(())
}
