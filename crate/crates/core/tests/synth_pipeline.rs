mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;

use common::{snapshot, Fixture};
use weaknessminer::artifact::{read_jsonl, write_jsonl};
use weaknessminer::config::PipelineConfig;
use weaknessminer::pipeline::{self, SecurityCommit};
use weaknessminer::synth::{self, Plan};
use weaknessminer::szz::WccChain;
use weaknessminer::weakness::Weakness;
use weaknessminer::wfc::{Decision, WfcAssignment};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_weaknessminer"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn pipeline_recovers_scripted_lifecycles() {
    let fx = Fixture::new();
    let cfg = PipelineConfig::load(&fx.config("ws", 2)).unwrap();
    let run = pipeline::run_pipeline(&cfg, false).unwrap();
    let ws = &cfg.workspace.dir;

    assert_eq!(run.funnel.projects, fx.corpus.projects.len());
    assert_eq!(run.funnel.commits, fx.corpus.total_commits());
    assert_eq!(run.funnel.weaknesses, fx.corpus.expected_weaknesses);

    let security: Vec<SecurityCommit> =
        read_jsonl(&pipeline::security_file(&ws.join("filter"))).unwrap();
    let got: BTreeSet<_> = security
        .iter()
        .map(|s| (s.project.clone(), s.verdict.commit_hash.clone()))
        .collect();
    assert_eq!(got, fx.corpus.security_hashes());

    let assignments: Vec<WfcAssignment> =
        read_jsonl(&pipeline::assignments_file(&ws.join("classify"))).unwrap();
    for f in &fx.corpus.fixes {
        let a = assignments
            .iter()
            .find(|a| a.commit_hash == f.hash)
            .unwrap();
        match &f.plan {
            Plan::Assign(c) => {
                assert_eq!(a.decision, Decision::Assigned(c.clone()), "{}", f.message)
            }
            Plan::Disagree(..) => assert_eq!(a.decision, Decision::NeedsReview, "{}", f.message),
            Plan::Reject => assert_eq!(a.decision, Decision::Rejected, "{}", f.message),
        }
    }

    let chains: Vec<WccChain> = read_jsonl(&pipeline::chains_file(&ws.join("trace"))).unwrap();
    for f in fx
        .corpus
        .fixes
        .iter()
        .filter(|f| matches!(f.plan, Plan::Assign(_)))
    {
        let c = chains.iter().find(|c| c.wfc_hash == f.hash).unwrap();
        let got: BTreeSet<String> = c.wccs.iter().map(|w| w.hash.clone()).collect();
        assert_eq!(got, f.expected_wccs, "chain of {:?}", f.message);
        assert_eq!(c.untraceable_reason, f.expected_reason, "{:?}", f.message);
    }

    let weaknesses: Vec<Weakness> =
        read_jsonl(&pipeline::weaknesses_file(&ws.join("weaknesses"))).unwrap();
    let alpha: Vec<&Weakness> = weaknesses.iter().filter(|w| w.project == "alpha").collect();
    assert_eq!(
        alpha.iter().map(|w| w.fixes.len()).collect::<Vec<_>>(),
        vec![2, 1]
    );
    assert!(pipeline::audit(ws).unwrap().passed());

    for name in [
        "cwe_distribution.csv",
        "density.csv",
        "annual_trend.csv",
        "window_summary.csv",
        "bundle.json",
    ] {
        assert!(ws.join("report").join(name).exists(), "{name}");
    }
}

#[test]
fn excluded_projects_are_reported() {
    let fx = Fixture::new();
    let out = fx.path("ingest");
    let s = pipeline::stage_ingest(
        &fx.corpus.manifest,
        &fx.path("repos"),
        &out,
        synth::MIN_COMMITS,
        3,
    )
    .unwrap();
    assert_eq!(s.excluded_too_few_commits, fx.corpus.excluded);
    assert!(s.excluded_inaccessible.is_empty());
    assert_eq!(s.selected.len(), fx.corpus.projects.len());
}

#[test]
fn missing_repository_is_excluded_not_fatal() {
    let fx = Fixture::new();
    let manifest = fx.path("manifest.txt");
    let mut text = std::fs::read_to_string(&fx.corpus.manifest).unwrap();
    text.push_str(&format!("{} id=ghost\n", fx.path("nowhere").display()));
    std::fs::write(&manifest, text).unwrap();
    let s = pipeline::stage_ingest(
        &manifest,
        &fx.path("repos"),
        &fx.path("ingest"),
        synth::MIN_COMMITS,
        1,
    )
    .unwrap();
    assert_eq!(s.excluded_inaccessible, vec!["ghost".to_string()]);
}

#[test]
fn resume_skips_completed_stages_and_reproduces_output() {
    let fx = Fixture::new();
    let cfg = PipelineConfig::load(&fx.config("ws", 4)).unwrap();
    pipeline::run_pipeline(&cfg, false).unwrap();
    let first = snapshot(&cfg.workspace.dir);

    let again = pipeline::run_pipeline(&cfg, true).unwrap();
    assert!(again.executed.is_empty());
    assert_eq!(snapshot(&cfg.workspace.dir), first);

    std::fs::remove_file(cfg.workspace.dir.join("trace/.done")).unwrap();
    let partial = pipeline::run_pipeline(&cfg, true).unwrap();
    assert_eq!(partial.skipped, vec!["ingest", "filter", "classify"]);
    assert_eq!(partial.executed, vec!["trace", "weaknesses", "report"]);
    assert_eq!(snapshot(&cfg.workspace.dir), first);
}

#[test]
fn audit_detects_dropped_weakness() {
    let fx = Fixture::new();
    let cfg = PipelineConfig::load(&fx.config("ws", 1)).unwrap();
    pipeline::run_pipeline(&cfg, false).unwrap();
    let path = pipeline::weaknesses_file(&cfg.workspace.dir.join("weaknesses"));
    let mut ws: Vec<Weakness> = read_jsonl(&path).unwrap();
    ws.remove(0);
    write_jsonl(&path, &ws).unwrap();

    let report = pipeline::audit(&cfg.workspace.dir).unwrap();
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    assert_eq!(failed, vec!["dedup_count_conservation"]);

    let status = bin()
        .args(["audit", "--workspace"])
        .arg(&cfg.workspace.dir)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(4));
}

#[test]
fn audit_detects_wfc_outside_security_commits() {
    let fx = Fixture::new();
    let cfg = PipelineConfig::load(&fx.config("ws", 1)).unwrap();
    pipeline::run_pipeline(&cfg, false).unwrap();
    let path = pipeline::security_file(&cfg.workspace.dir.join("filter"));
    let mut sc: Vec<SecurityCommit> = read_jsonl(&path).unwrap();
    sc.retain(|s| s.project != "charlie");
    write_jsonl(&path, &sc).unwrap();

    let report = pipeline::audit(&cfg.workspace.dir).unwrap();
    let failed: BTreeSet<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    assert!(failed.contains("wfcs_subset_of_security_commits"));
    assert!(failed.contains("classified_subset_of_security_commits"));
}

#[test]
fn cli_stages_match_run() {
    let fx = Fixture::new();
    let cfg_path = fx.config("ws", 2);
    let run = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let cfg = PipelineConfig::load(&cfg_path).unwrap();

    let d = |s: &str| fx.path("manual").join(s);
    let ok = |args: Vec<std::ffi::OsString>| {
        let out = bin().args(args).output().unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let os = |s: &[&dyn AsRef<std::ffi::OsStr>]| {
        s.iter()
            .map(|x| x.as_ref().to_os_string())
            .collect::<Vec<_>>()
    };
    ok(os(&[
        &"ingest",
        &"--manifest",
        &fx.corpus.manifest,
        &"--out",
        &d("ingest"),
        &"--repos",
        &cfg.input.repos_dir,
        &"--min-commits",
        &"10",
        &"--jobs",
        &"3",
    ]));
    ok(os(&[
        &"filter",
        &"--in",
        &d("ingest"),
        &"--out",
        &d("filter"),
    ]));
    let mut classify = os(&[
        &"classify",
        &"--in",
        &d("filter"),
        &"--ingest",
        &d("ingest"),
        &"--out",
        &d("classify"),
        &"--word-vectors",
        &fx.stubs.word_vectors,
    ]);
    for e in &fx.stubs.exchange {
        classify.extend(os(&[&"--exchange", e]));
    }
    ok(classify);
    ok(os(&[
        &"trace",
        &"--in",
        &d("classify"),
        &"--ingest",
        &d("ingest"),
        &"--out",
        &d("trace"),
        &"--jobs",
        &"8",
    ]));
    ok(os(&[
        &"weaknesses",
        &"--in",
        &d("trace"),
        &"--classify",
        &d("classify"),
        &"--ingest",
        &d("ingest"),
        &"--out",
        &d("weaknesses"),
    ]));
    ok(os(&[
        &"report",
        &"--weaknesses",
        &d("weaknesses"),
        &"--ingest",
        &d("ingest"),
        &"--out",
        &d("report"),
    ]));

    for stage in ["filter", "classify", "trace", "weaknesses", "report"] {
        let mut auto = snapshot(&cfg.workspace.dir.join(stage));
        auto.remove(".done");
        assert_eq!(snapshot(&d(stage)), auto, "{stage}");
    }
}

#[test]
fn cli_exit_codes() {
    let fx = Fixture::new();
    let bad = fx.path("bad.toml");
    std::fs::write(
        &bad,
        "[input]\nmanifest = \"missing.txt\"\n[workspace]\ndir = \"ws\"\n",
    )
    .unwrap();
    assert_eq!(
        bin()
            .args(["run", "--config"])
            .arg(&bad)
            .status()
            .unwrap()
            .code(),
        Some(2)
    );
    assert_eq!(bin().args(["frobnicate"]).status().unwrap().code(), Some(2));

    let empty = fx.path("empty-ingest");
    std::fs::create_dir_all(&empty).unwrap();
    let status = bin()
        .args(["filter", "--in"])
        .arg(&empty)
        .arg("--out")
        .arg(fx.path("f"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn external_classifier_promotes_commits() {
    let fx = Fixture::new();
    let ingest = fx.path("ingest");
    pipeline::stage_ingest(
        &fx.corpus.manifest,
        &fx.path("repos"),
        &ingest,
        synth::MIN_COMMITS,
        2,
    )
    .unwrap();

    // Scores every commit whose request mentions "grip" as certain.
    let script = fx.path("clf.sh");
    std::fs::write(
        &script,
        r#"while IFS= read -r line; do
  h=$(printf '%s' "$line" | sed 's/.*"hash":"\([0-9a-f]*\)".*/\1/')
  case "$line" in *grip*) echo "$h 0.99";; *) echo "$h 0.01";; esac
done
"#,
    )
    .unwrap();
    let opts = |cmd: Option<String>| pipeline::FilterOptions {
        lexicon: Default::default(),
        classifier_cmd: cmd,
        threshold: 0.5,
    };
    let base = pipeline::stage_filter(&ingest, &fx.path("f0"), &opts(None)).unwrap();
    let with = pipeline::stage_filter(
        &ingest,
        &fx.path("f1"),
        &opts(Some(format!("sh {}", script.display()))),
    )
    .unwrap();
    assert!(!with.degraded, "{:?}", with.degraded_cause);
    assert!(with.security_commits > base.security_commits);

    let broken =
        pipeline::stage_filter(&ingest, &fx.path("f2"), &opts(Some("false".into()))).unwrap();
    assert!(broken.degraded);
    assert_eq!(broken.security_commits, base.security_commits);
}

#[test]
fn jobs_do_not_change_trace_output() {
    let fx = Fixture::new();
    let mut outputs = BTreeMap::new();
    for jobs in [1, 8] {
        let cfg = PipelineConfig::load(&fx.config(&format!("ws{jobs}"), jobs)).unwrap();
        pipeline::run_pipeline(&cfg, false).unwrap();
        outputs.insert(jobs, snapshot(&cfg.workspace.dir.join("trace")));
    }
    assert_eq!(outputs[&1], outputs[&8]);
}
