use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use weaknessminer::analytics::{GroupBy, ReportOptions, YearKey};
use weaknessminer::config::PipelineConfig;
use weaknessminer::pipeline::{self, ClassifyOptions, FilterOptions};
use weaknessminer::secfilter::{KeywordLexicon, DEFAULT_THRESHOLD};
use weaknessminer::semvec::IdfBase;
use weaknessminer::szz::SzzConfig;
use weaknessminer::weakness::ExpDenominator;
use weaknessminer::Error;

#[derive(Parser)]
#[command(
    name = "weaknessminer",
    version,
    about = "Mine git histories for security weaknesses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select projects from a manifest and extract their commit histories.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where clones live; defaults to `<out>/repos`.
        #[arg(long)]
        repos: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        min_commits: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Keep security-related commits.
    Filter {
        /// Ingest stage directory.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        classifier_cmd: Option<String>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Assign CWE categories to security commits by ensemble vote.
    Classify {
        /// Filter stage directory.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        ingest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        word_vectors: Option<PathBuf>,
        #[arg(long)]
        exchange: Vec<PathBuf>,
        #[arg(long, default_value_t = 4)]
        vote_k: usize,
        #[arg(long, value_enum, default_value_t = IdfBase::Log10)]
        idf_base: IdfBase,
    },
    /// Trace each fixing commit back to the commits that introduced it.
    Trace {
        /// Classify stage directory.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        ingest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override repository locations with `<repos>/<project>`.
        #[arg(long)]
        repos: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Merge fixes into weaknesses and compute lifecycle and developer status.
    Weaknesses {
        /// Trace stage directory.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        classify: PathBuf,
        #[arg(long)]
        ingest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ExpDenominator::Sum)]
        exp_denominator: ExpDenominator,
    },
    /// Write the analytics tables.
    Report {
        /// Weakness records (weaknesses.jsonl or its stage directory).
        #[arg(long)]
        weaknesses: PathBuf,
        #[arg(long)]
        ingest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = GroupBy::Cwe)]
        group_by: GroupBy,
        #[arg(long, value_enum, default_value_t = YearKey::T1)]
        year_key: YearKey,
        #[arg(long)]
        libraries: Option<PathBuf>,
        #[arg(long)]
        goals: Option<PathBuf>,
    },
    /// Run every stage from a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Skip stages already marked complete.
        #[arg(long)]
        resume: bool,
    },
    /// Check cross-stage invariants of a finished workspace.
    Audit {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        workspace: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn print<T: Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn prepare(out: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn dispatch(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Ingest {
            manifest,
            out,
            repos,
            min_commits,
            jobs,
        } => {
            prepare(&out)?;
            let repos = repos.unwrap_or_else(|| out.join("repos"));
            print(&pipeline::stage_ingest(
                &manifest,
                &repos,
                &out,
                min_commits,
                jobs,
            )?)?;
        }
        Command::Filter {
            input,
            out,
            lexicon,
            classifier_cmd,
            threshold,
        } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::InvalidArgument(format!(
                    "threshold {threshold} outside [0, 1]"
                )));
            }
            prepare(&out)?;
            let lexicon = match lexicon {
                Some(p) => KeywordLexicon::parse(&std::fs::read_to_string(p)?)?,
                None => KeywordLexicon::default(),
            };
            let opts = FilterOptions {
                lexicon,
                classifier_cmd,
                threshold,
            };
            print(&pipeline::stage_filter(&input, &out, &opts)?)?;
        }
        Command::Classify {
            input,
            ingest,
            out,
            catalog,
            stopwords,
            word_vectors,
            exchange,
            vote_k,
            idf_base,
        } => {
            prepare(&out)?;
            let opts = ClassifyOptions {
                catalog,
                stopwords,
                word_vectors,
                exchange,
                vote_k,
                idf_base,
            };
            print(&pipeline::stage_classify(&ingest, &input, &out, &opts)?)?;
        }
        Command::Trace {
            input,
            ingest,
            out,
            repos,
            jobs,
        } => {
            prepare(&out)?;
            let summary = pipeline::stage_trace(
                &ingest,
                &input,
                &out,
                repos.as_deref(),
                jobs,
                &SzzConfig::default(),
            )?;
            print(&summary)?;
        }
        Command::Weaknesses {
            input,
            classify,
            ingest,
            out,
            exp_denominator,
        } => {
            prepare(&out)?;
            print(&pipeline::stage_weaknesses(
                &ingest,
                &classify,
                &input,
                &out,
                exp_denominator,
            )?)?;
        }
        Command::Report {
            weaknesses,
            ingest,
            out,
            group_by,
            year_key,
            libraries,
            goals,
        } => {
            prepare(&out)?;
            let weaknesses = if weaknesses.is_dir() {
                pipeline::weaknesses_file(&weaknesses)
            } else {
                weaknesses
            };
            let bundle = pipeline::stage_report(
                &weaknesses,
                &ingest,
                &out,
                ReportOptions { group_by, year_key },
                libraries.as_deref(),
                goals.as_deref(),
            )?;
            eprintln!(
                "report written to {} ({} CWE rows)",
                out.display(),
                bundle.cwe_distribution.len()
            );
        }
        Command::Run { config, resume } => {
            let cfg = PipelineConfig::load(&config)?;
            print(&pipeline::run_pipeline(&cfg, resume)?)?;
        }
        Command::Audit { workspace, config } => {
            let dir = match (workspace, config) {
                (Some(w), _) => w,
                (None, Some(c)) => PipelineConfig::load(&c)?.workspace.dir,
                (None, None) => unreachable!("clap requires one of the two"),
            };
            let report = pipeline::audit(&dir)?;
            for c in &report.checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if !report.passed() {
                return Ok(ExitCode::from(4));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) | Error::LexiconInvalid(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}
