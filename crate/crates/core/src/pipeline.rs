//! Stage runners over plain-file artifacts, the end-to-end driver with
//! resume support, and the cross-stage conservation audit.
//!
//! Workspace layout (one directory per stage, each closed by a `.done`
//! marker once its artifacts are complete):
//!
//! ```text
//! ingest/      projects.jsonl  history/<project>.jsonl  summary.json
//! filter/      security.jsonl  summary.json
//! classify/    assignments.jsonl  review_queue.jsonl  summary.json
//! trace/       chains.jsonl  summary.json
//! weaknesses/  weaknesses.jsonl  summary.json
//! report/      *.csv  bundle.json
//! summary.json audit.json
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, GoalLexicon, ReportInput, ReportOptions};
use crate::artifact::{read_json, read_jsonl, write_json, write_jsonl};
use crate::config::PipelineConfig;
use crate::cwe_catalog::{default_stopwords, Catalog, Stopwords};
use crate::error::{Error, Result};
use crate::ingest::{self, Candidate, CommitRecord, ProjectRecord};
use crate::secfilter::{self, ExternalClassifier, FilterVerdict, KeywordFilter, KeywordLexicon};
use crate::semvec::{
    load_exchange_file, CorpusStats, EmbeddingProvider, IdfBase, TfIdfProvider, WordVectorTable,
};
use crate::szz::{self, SzzConfig, WccChain};
use crate::weakness::{self, ExpDenominator, HistoryIndex, Weakness};
use crate::wfc::{self, Decision, ScoringContext, WfcAssignment};

pub const STAGES: [&str; 6] = [
    "ingest",
    "filter",
    "classify",
    "trace",
    "weaknesses",
    "report",
];
const DONE: &str = ".done";

pub fn projects_file(ingest_dir: &Path) -> PathBuf {
    ingest_dir.join("projects.jsonl")
}

pub fn security_file(filter_dir: &Path) -> PathBuf {
    filter_dir.join("security.jsonl")
}

pub fn assignments_file(classify_dir: &Path) -> PathBuf {
    classify_dir.join("assignments.jsonl")
}

pub fn chains_file(trace_dir: &Path) -> PathBuf {
    trace_dir.join("chains.jsonl")
}

pub fn weaknesses_file(weakness_dir: &Path) -> PathBuf {
    weakness_dir.join("weaknesses.jsonl")
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub candidates: usize,
    pub selected: Vec<String>,
    pub excluded_inaccessible: Vec<String>,
    pub excluded_too_few_commits: Vec<String>,
    pub commits: usize,
}

/// Selects projects from a manifest, cloning any not yet present under
/// `repos_dir/<id>`, and writes one history file per selected project.
pub fn stage_ingest(
    manifest: &Path,
    repos_dir: &Path,
    out: &Path,
    min_commits: u64,
    jobs: usize,
) -> Result<IngestSummary> {
    let entries = ingest::parse_manifest(&std::fs::read_to_string(manifest)?)?;
    let ids = ingest::assign_ids(&entries);
    std::fs::create_dir_all(repos_dir)?;
    let candidates: Vec<Candidate> = with_pool(jobs, || {
        entries
            .par_iter()
            .zip(&ids)
            .map(|(e, id)| {
                let local = repos_dir.join(id);
                let project = ProjectRecord::new(id.clone(), e.url.clone(), local.clone())
                    .with_category(e.category);
                let ready = git_ready(&e.url, &local);
                let commit_count = if ready {
                    crate::git::commit_count(&local).unwrap_or(0)
                } else {
                    0
                };
                Candidate {
                    project,
                    commit_count,
                    accessible: ready,
                }
            })
            .collect()
    })?;
    let mut excluded_inaccessible = Vec::new();
    let mut excluded_too_few_commits = Vec::new();
    for c in &candidates {
        if !c.accessible {
            excluded_inaccessible.push(c.project.id.clone());
        } else if c.commit_count < min_commits {
            excluded_too_few_commits.push(c.project.id.clone());
        }
    }
    let n_candidates = candidates.len();
    let selection = ingest::select_projects(candidates, min_commits)?;

    let extracted: Vec<(ProjectRecord, Vec<CommitRecord>)> = with_pool(jobs, || {
        selection
            .projects
            .into_par_iter()
            .map(|mut p| {
                let commits = ingest::extract_commits(&p)?;
                ingest::describe_project(&mut p, &commits)?;
                Ok((p, commits))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut commits = 0;
    for (p, history) in &extracted {
        write_jsonl(&ingest::history_path(out, &p.id), history)?;
        commits += history.len();
    }
    let projects: Vec<&ProjectRecord> = extracted.iter().map(|(p, _)| p).collect();
    write_jsonl(&projects_file(out), projects.iter().copied())?;
    let summary = IngestSummary {
        candidates: n_candidates,
        selected: extracted.iter().map(|(p, _)| p.id.clone()).collect(),
        excluded_inaccessible,
        excluded_too_few_commits,
        commits,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn git_ready(url: &str, local: &Path) -> bool {
    if crate::git::is_repository(local) {
        return true;
    }
    match crate::git::clone(url, local) {
        Ok(()) => true,
        Err(e) => {
            log::warn!("{e}");
            false
        }
    }
}

pub fn load_projects(ingest_dir: &Path) -> Result<Vec<ProjectRecord>> {
    let path = projects_file(ingest_dir);
    if !path.exists() {
        return Err(Error::Artifact {
            path,
            line: 0,
            reason: "missing; is this an ingest output directory?".into(),
        });
    }
    read_jsonl(&path)
}

pub fn load_histories(
    ingest_dir: &Path,
    projects: &[ProjectRecord],
) -> Result<BTreeMap<String, Vec<CommitRecord>>> {
    projects
        .iter()
        .map(|p| {
            Ok((
                p.id.clone(),
                read_jsonl(&ingest::history_path(ingest_dir, &p.id))?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityCommit {
    pub project: String,
    #[serde(flatten)]
    pub verdict: FilterVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub commits: usize,
    pub keyword_matches: usize,
    pub security_commits: usize,
    pub degraded: bool,
    pub degraded_cause: Option<String>,
}

pub struct FilterOptions {
    pub lexicon: KeywordLexicon,
    pub classifier_cmd: Option<String>,
    pub threshold: f64,
}

pub fn stage_filter(ingest_dir: &Path, out: &Path, opts: &FilterOptions) -> Result<FilterSummary> {
    let projects = load_projects(ingest_dir)?;
    let histories = load_histories(ingest_dir, &projects)?;
    let filter = KeywordFilter::new(&opts.lexicon)?;
    let classifier = opts.classifier_cmd.as_deref().map(ExternalClassifier::new);
    let mut records = Vec::new();
    let (mut commits, mut keyword_matches) = (0, 0);
    let mut degraded_cause = None;
    for (project, history) in &histories {
        let outcome =
            secfilter::filter_commits(history, &filter, classifier.as_ref(), opts.threshold);
        if outcome.degraded && degraded_cause.is_none() {
            degraded_cause = outcome.degraded_cause;
        }
        commits += history.len();
        for v in outcome.verdicts {
            keyword_matches += usize::from(v.keyword_match);
            if v.is_security {
                records.push(SecurityCommit {
                    project: project.clone(),
                    verdict: v,
                });
            }
        }
    }
    write_jsonl(&security_file(out), &records)?;
    let summary = FilterSummary {
        commits,
        keyword_matches,
        security_commits: records.len(),
        degraded: degraded_cause.is_some(),
        degraded_cause,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Default)]
pub struct ClassifyOptions {
    pub catalog: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
    pub exchange: Vec<PathBuf>,
    pub vote_k: usize,
    pub idf_base: IdfBase,
}

pub fn load_catalog(opts: &ClassifyOptions) -> Result<(Catalog, Stopwords)> {
    let stopwords = match &opts.stopwords {
        Some(p) => Stopwords::load(p)?,
        None => default_stopwords(),
    };
    let catalog = match &opts.catalog {
        Some(p) => Catalog::load_catalog(p, &stopwords)?,
        None => Catalog::builtin(),
    };
    Ok((catalog, stopwords))
}

/// The in-process TF-IDF provider (when word vectors are given) followed by
/// one provider per exchange file, named after the file stem.
pub fn build_providers(
    opts: &ClassifyOptions,
    catalog: &Catalog,
    stopwords: &Stopwords,
) -> Result<Vec<Box<dyn EmbeddingProvider>>> {
    let mut providers: Vec<Box<dyn EmbeddingProvider>> = Vec::new();
    if let Some(p) = &opts.word_vectors {
        let table = WordVectorTable::load(p)?;
        providers.push(Box::new(TfIdfProvider::new(
            "tfidf",
            catalog,
            CorpusStats::from_catalog(catalog).with_idf_base(opts.idf_base),
            table,
            stopwords.clone(),
        )?));
    }
    for path in &opts.exchange {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "exchange".into());
        providers.push(Box::new(load_exchange_file(id, path)?));
    }
    Ok(providers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub providers: Vec<String>,
    /// TF denominators are per-category and per-message token totals.
    pub tf_reading: String,
    pub idf_base: IdfBase,
    pub classified: usize,
    pub assigned: usize,
    pub needs_review: usize,
    pub rejected: usize,
}

pub fn stage_classify(
    ingest_dir: &Path,
    filter_dir: &Path,
    out: &Path,
    opts: &ClassifyOptions,
) -> Result<ClassifySummary> {
    let projects = load_projects(ingest_dir)?;
    let histories = load_histories(ingest_dir, &projects)?;
    let messages: HashMap<(&str, &str), &str> = histories
        .iter()
        .flat_map(|(p, h)| {
            h.iter()
                .map(move |c| ((p.as_str(), c.hash.as_str()), c.message.as_str()))
        })
        .collect();
    let security: Vec<SecurityCommit> = read_jsonl(&security_file(filter_dir))?;
    let jobs: Vec<(String, String, String)> = security
        .iter()
        .map(|s| {
            let msg = messages
                .get(&(s.project.as_str(), s.verdict.commit_hash.as_str()))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "{}:{} not in ingest history",
                        s.project, s.verdict.commit_hash
                    ))
                })?;
            Ok((
                s.project.clone(),
                s.verdict.commit_hash.clone(),
                msg.to_string(),
            ))
        })
        .collect::<Result<_>>()?;

    let (catalog, stopwords) = load_catalog(opts)?;
    let providers = build_providers(opts, &catalog, &stopwords)?;
    let ctx = ScoringContext::new(&catalog, &providers)?;
    let assignments = wfc::classify_all(&ctx, &jobs, opts.vote_k)?;
    let review: Vec<&WfcAssignment> = assignments
        .iter()
        .filter(|a| a.decision == Decision::NeedsReview)
        .collect();
    write_jsonl(&assignments_file(out), &assignments)?;
    write_jsonl(&out.join("review_queue.jsonl"), review.iter().copied())?;
    let summary = ClassifySummary {
        providers: providers
            .iter()
            .map(|p| p.provider_id().to_string())
            .collect(),
        tf_reading: "token_total".into(),
        idf_base: opts.idf_base,
        classified: assignments.len(),
        assigned: assignments
            .iter()
            .filter(|a| a.assigned_cwe().is_some())
            .count(),
        needs_review: review.len(),
        rejected: assignments
            .iter()
            .filter(|a| a.decision == Decision::Rejected)
            .count(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub chains: usize,
    pub traced: usize,
    pub untraceable: BTreeMap<String, usize>,
    pub distinct_wccs: usize,
}

/// Traces every assigned WFC. Repositories come from the project records
/// unless `repos_override` is given, in which case `<dir>/<project>` is used.
pub fn stage_trace(
    ingest_dir: &Path,
    classify_dir: &Path,
    out: &Path,
    repos_override: Option<&Path>,
    jobs: usize,
    szz_cfg: &SzzConfig,
) -> Result<TraceSummary> {
    let projects = load_projects(ingest_dir)?;
    let histories = load_histories(ingest_dir, &projects)?;
    let assignments: Vec<WfcAssignment> = read_jsonl(&assignments_file(classify_dir))?;
    let mut wfcs = Vec::new();
    for a in assignments.iter().filter(|a| a.assigned_cwe().is_some()) {
        let commit = histories
            .get(&a.project)
            .and_then(|h| h.iter().find(|c| c.hash == a.commit_hash))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{}:{} not in ingest history",
                    a.project, a.commit_hash
                ))
            })?;
        wfcs.push((a.project.clone(), commit.clone()));
    }
    let repos: HashMap<String, PathBuf> = projects
        .iter()
        .map(|p| {
            let path = match repos_override {
                Some(dir) => dir.join(&p.id),
                None => p.local_path.clone(),
            };
            (p.id.clone(), path)
        })
        .collect();
    let repo_for = |project: &str| repos.get(project).cloned();
    let chains = szz::trace_all(&wfcs, &repo_for, jobs, szz_cfg)?;
    write_jsonl(&chains_file(out), &chains)?;

    let mut untraceable = BTreeMap::new();
    for c in chains.iter().filter(|c| !c.traced) {
        let reason = c
            .untraceable_reason
            .and_then(|r| serde_json::to_value(r).ok())
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_else(|| "unknown".into());
        *untraceable.entry(reason).or_insert(0) += 1;
    }
    let summary = TraceSummary {
        chains: chains.len(),
        traced: chains.iter().filter(|c| c.traced).count(),
        untraceable,
        distinct_wccs: distinct_wccs(&chains),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn distinct_wccs(chains: &[WccChain]) -> usize {
    chains
        .iter()
        .flat_map(|c| c.wccs.iter().map(move |w| (&c.project, &w.hash)))
        .collect::<BTreeSet<_>>()
        .len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeaknessSummary {
    pub input_wfcs: usize,
    pub weaknesses: usize,
    pub merged_away: usize,
    pub untraced: usize,
}

pub fn stage_weaknesses(
    ingest_dir: &Path,
    classify_dir: &Path,
    trace_dir: &Path,
    out: &Path,
    exp_mode: ExpDenominator,
) -> Result<WeaknessSummary> {
    let projects = load_projects(ingest_dir)?;
    let histories = load_histories(ingest_dir, &projects)?;
    let assignments: Vec<WfcAssignment> = read_jsonl(&assignments_file(classify_dir))?;
    let chains: Vec<WccChain> = read_jsonl(&chains_file(trace_dir))?;
    let mut by_fix: HashMap<(String, String), WccChain> = chains
        .into_iter()
        .map(|c| ((c.project.clone(), c.wfc_hash.clone()), c))
        .collect();

    let mut items = Vec::new();
    for a in assignments
        .into_iter()
        .filter(|a| a.assigned_cwe().is_some())
    {
        let at = histories
            .get(&a.project)
            .and_then(|h| h.iter().find(|c| c.hash == a.commit_hash))
            .map(|c| c.authored_at)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{}:{} not in ingest history",
                    a.project, a.commit_hash
                ))
            })?;
        let chain = by_fix.remove(&(a.project.clone(), a.commit_hash.clone()));
        items.push((a, chain, at));
    }
    let mut weaknesses = weakness::deduplicate(&items);
    let indexes: HashMap<&str, HistoryIndex<'_>> = histories
        .iter()
        .map(|(p, h)| (p.as_str(), HistoryIndex::new(h)))
        .collect();
    weaknesses.par_iter_mut().for_each(|w| {
        if let Some(idx) = indexes.get(w.project.as_str()) {
            weakness::enrich(w, idx, exp_mode);
        }
    });
    write_jsonl(&weaknesses_file(out), &weaknesses)?;
    let summary = WeaknessSummary {
        input_wfcs: items.len(),
        weaknesses: weaknesses.len(),
        merged_away: weaknesses.iter().map(|w| w.fixes.len() - 1).sum(),
        untraced: weaknesses.iter().filter(|w| !w.is_traced()).count(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn stage_report(
    weaknesses_path: &Path,
    ingest_dir: &Path,
    out: &Path,
    options: ReportOptions,
    libraries: Option<&Path>,
    goals: Option<&Path>,
) -> Result<analytics::ReportBundle> {
    let projects = load_projects(ingest_dir)?;
    let histories = load_histories(ingest_dir, &projects)?;
    let weaknesses: Vec<Weakness> = read_jsonl(weaknesses_path)?;
    let library_paths = match libraries {
        Some(p) => analytics::parse_library_paths(&std::fs::read_to_string(p)?)?,
        None => BTreeMap::new(),
    };
    let goals = match goals {
        Some(p) => GoalLexicon::parse(&std::fs::read_to_string(p)?)?,
        None => GoalLexicon::builtin(),
    };
    let input = ReportInput {
        projects: &projects,
        histories: &histories,
        weaknesses: &weaknesses,
        library_paths: &library_paths,
        goals: &goals,
    };
    let (bundle, observations) = analytics::build_report(&input, options);
    analytics::write_report(&bundle, &observations, out)?;
    Ok(bundle)
}

/// Stage-by-stage counts mirroring the study's funnel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funnel {
    pub projects: usize,
    pub commits: usize,
    pub security_commits: usize,
    pub wfcs: usize,
    pub wccs: usize,
    pub weaknesses: usize,
}

pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    pub fn is_done(&self, stage: &str) -> bool {
        self.stage_dir(stage).join(DONE).exists()
    }

    fn mark_done(&self, stage: &str) -> Result<()> {
        std::fs::write(self.stage_dir(stage).join(DONE), format!("{stage}\n"))?;
        Ok(())
    }

    pub fn funnel(&self) -> Result<Funnel> {
        let ingest = self.stage_dir("ingest");
        let projects = load_projects(&ingest)?;
        let histories = load_histories(&ingest, &projects)?;
        let security: Vec<SecurityCommit> = read_jsonl(&security_file(&self.stage_dir("filter")))?;
        let assignments: Vec<WfcAssignment> =
            read_jsonl(&assignments_file(&self.stage_dir("classify")))?;
        let chains: Vec<WccChain> = read_jsonl(&chains_file(&self.stage_dir("trace")))?;
        let weaknesses: Vec<Weakness> =
            read_jsonl(&weaknesses_file(&self.stage_dir("weaknesses")))?;
        Ok(Funnel {
            projects: projects.len(),
            commits: histories.values().map(Vec::len).sum(),
            security_commits: security.len(),
            wfcs: assignments
                .iter()
                .filter(|a| a.assigned_cwe().is_some())
                .count(),
            wccs: distinct_wccs(&chains),
            weaknesses: weaknesses.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
    pub funnel: Funnel,
}

/// Runs every stage in order. With `resume`, stages whose `.done` marker
/// exists are skipped until the first stage that has to run; every later
/// stage then runs again.
pub fn run_pipeline(cfg: &PipelineConfig, resume: bool) -> Result<RunSummary> {
    cfg.validate()?;
    let ws = Workspace::new(&cfg.workspace.dir);
    std::fs::create_dir_all(&ws.root)?;
    let mut executed = Vec::new();
    let mut skipped = Vec::new();
    let mut rerun = !resume;
    for stage in STAGES {
        if !rerun && ws.is_done(stage) {
            log::info!("{stage}: already complete, skipping");
            skipped.push(stage.to_string());
            continue;
        }
        rerun = true;
        let dir = ws.stage_dir(stage);
        if dir.exists() {
            std::fs::remove_dir_all(&dir)?;
        }
        std::fs::create_dir_all(&dir)?;
        log::info!("{stage}: running");
        run_stage(cfg, &ws, stage).map_err(|e| Error::StageFailed {
            stage: stage.to_string(),
            cause: e.to_string(),
        })?;
        ws.mark_done(stage)?;
        executed.push(stage.to_string());
    }
    let funnel = ws.funnel()?;
    write_json(&ws.root.join("summary.json"), &funnel)?;
    Ok(RunSummary {
        executed,
        skipped,
        funnel,
    })
}

fn run_stage(cfg: &PipelineConfig, ws: &Workspace, stage: &str) -> Result<()> {
    let dir = |s: &str| ws.stage_dir(s);
    let jobs = cfg.workspace.jobs;
    match stage {
        "ingest" => {
            stage_ingest(
                &cfg.input.manifest,
                &cfg.input.repos_dir,
                &dir("ingest"),
                cfg.input.min_commits,
                jobs,
            )?;
        }
        "filter" => {
            let lexicon = match &cfg.filter.lexicon {
                Some(p) => KeywordLexicon::parse(&std::fs::read_to_string(p)?)?,
                None => KeywordLexicon::default(),
            };
            let opts = FilterOptions {
                lexicon,
                classifier_cmd: cfg.filter.classifier_cmd.clone(),
                threshold: cfg.filter.threshold,
            };
            with_pool(jobs, || stage_filter(&dir("ingest"), &dir("filter"), &opts))??;
        }
        "classify" => {
            let opts = classify_options(cfg);
            with_pool(jobs, || {
                stage_classify(&dir("ingest"), &dir("filter"), &dir("classify"), &opts)
            })??;
        }
        "trace" => {
            stage_trace(
                &dir("ingest"),
                &dir("classify"),
                &dir("trace"),
                None,
                jobs,
                &cfg.trace.szz(),
            )?;
        }
        "weaknesses" => {
            with_pool(jobs, || {
                stage_weaknesses(
                    &dir("ingest"),
                    &dir("classify"),
                    &dir("trace"),
                    &dir("weaknesses"),
                    cfg.weakness.exp_denominator,
                )
            })??;
        }
        "report" => {
            stage_report(
                &weaknesses_file(&dir("weaknesses")),
                &dir("ingest"),
                &dir("report"),
                ReportOptions {
                    group_by: cfg.report.group_by,
                    year_key: cfg.report.year_key,
                },
                cfg.report.libraries.as_deref(),
                cfg.report.goals.as_deref(),
            )?;
        }
        other => return Err(Error::InvalidArgument(format!("unknown stage {other}"))),
    }
    Ok(())
}

pub fn classify_options(cfg: &PipelineConfig) -> ClassifyOptions {
    ClassifyOptions {
        catalog: cfg.classify.catalog.clone(),
        stopwords: cfg.classify.stopwords.clone(),
        word_vectors: cfg.classify.word_vectors.clone(),
        exchange: cfg.classify.exchange.clone(),
        vote_k: cfg.classify.vote_k,
        idf_base: cfg.classify.idf_base,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
    pub funnel: Funnel,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, violations: Vec<String>) -> AuditCheck {
    AuditCheck {
        name: name.to_string(),
        passed: violations.is_empty(),
        detail: if violations.is_empty() {
            "ok".into()
        } else {
            let shown: Vec<&str> = violations.iter().take(5).map(String::as_str).collect();
            format!("{} violation(s): {}", violations.len(), shown.join("; "))
        },
    }
}

type Key = (String, String);

/// Verifies subset relations between stages, dedup conservation and the
/// lifecycle identities on a completed workspace.
pub fn audit(workspace: &Path) -> Result<AuditReport> {
    let ws = Workspace::new(workspace);
    let ingest = ws.stage_dir("ingest");
    let projects = load_projects(&ingest)?;
    let histories = load_histories(&ingest, &projects)?;
    let security: Vec<SecurityCommit> = read_jsonl(&security_file(&ws.stage_dir("filter")))?;
    let assignments: Vec<WfcAssignment> = read_jsonl(&assignments_file(&ws.stage_dir("classify")))?;
    let chains: Vec<WccChain> = read_jsonl(&chains_file(&ws.stage_dir("trace")))?;
    let weaknesses: Vec<Weakness> = read_jsonl(&weaknesses_file(&ws.stage_dir("weaknesses")))?;

    let c: BTreeSet<Key> = histories
        .iter()
        .flat_map(|(p, h)| h.iter().map(move |c| (p.clone(), c.hash.clone())))
        .collect();
    let c_sc: BTreeSet<Key> = security
        .iter()
        .map(|s| (s.project.clone(), s.verdict.commit_hash.clone()))
        .collect();
    let classified: BTreeSet<Key> = assignments
        .iter()
        .map(|a| (a.project.clone(), a.commit_hash.clone()))
        .collect();
    let c_wfc: BTreeSet<Key> = assignments
        .iter()
        .filter(|a| a.assigned_cwe().is_some())
        .map(|a| (a.project.clone(), a.commit_hash.clone()))
        .collect();
    let traced: BTreeSet<Key> = chains
        .iter()
        .map(|ch| (ch.project.clone(), ch.wfc_hash.clone()))
        .collect();
    let fmt = |k: &Key| format!("{}:{}", k.0, k.1);
    let missing =
        |a: &BTreeSet<Key>, b: &BTreeSet<Key>| a.difference(b).map(fmt).collect::<Vec<_>>();

    let mut checks = vec![
        check("security_commits_subset_of_commits", missing(&c_sc, &c)),
        check(
            "classified_subset_of_security_commits",
            missing(&classified, &c_sc),
        ),
        check("wfcs_subset_of_security_commits", missing(&c_wfc, &c_sc)),
        check("chains_cover_wfcs", {
            let mut v = missing(&c_wfc, &traced);
            v.extend(missing(&traced, &c_wfc));
            v
        }),
    ];

    let mut fix_count: BTreeMap<Key, usize> = BTreeMap::new();
    for w in &weaknesses {
        for f in &w.fixes {
            *fix_count
                .entry((w.project.clone(), f.hash.clone()))
                .or_default() += 1;
        }
    }
    let fixes: BTreeSet<Key> = fix_count.keys().cloned().collect();
    checks.push(check(
        "weakness_fixes_subset_of_wfcs",
        missing(&fixes, &c_wfc),
    ));

    let merged_away: usize = weaknesses.iter().map(|w| w.fixes.len() - 1).sum();
    let mut conservation = Vec::new();
    if weaknesses.len() + merged_away != c_wfc.len() {
        conservation.push(format!(
            "{} weaknesses + {merged_away} merged != {} WFCs",
            weaknesses.len(),
            c_wfc.len()
        ));
    }
    conservation.extend(
        fix_count
            .iter()
            .filter(|(_, &n)| n > 1)
            .map(|(k, n)| format!("{} in {n} weaknesses", fmt(k))),
    );
    conservation.extend(
        missing(&c_wfc, &fixes)
            .into_iter()
            .map(|k| format!("{k} in no weakness")),
    );
    checks.push(check("dedup_count_conservation", conservation));

    let mut lifecycle = Vec::new();
    for w in &weaknesses {
        let win = weakness::lifecycle(w);
        let ordered = w.t0.zip(w.t1).is_none_or(|(t0, t1)| t0 <= t1 && t1 <= w.t2) && w.t2 <= w.t3;
        let identity = match (win.lifetime_days, win.latency_days) {
            (Some(t13), Some(t12)) => (t13 - (t12 + win.fixing_days)).abs() <= 1e-9,
            _ => true,
        };
        let nonneg = [
            win.insertion_days,
            win.latency_days,
            Some(win.fixing_days),
            win.lifetime_days,
        ]
        .iter()
        .flatten()
        .all(|d| *d >= 0.0);
        let single = w.fixes.len() > 1 || win.fixing_days == 0.0;
        if !(ordered && identity && nonneg && single) {
            lifecycle.push(w.id.clone());
        }
    }
    checks.push(check("lifecycle_identities", lifecycle));

    let order: Vec<String> = chains
        .iter()
        .filter(|ch| {
            ch.wccs
                .iter()
                .any(|w| w.authored_at >= ch.wfc_authored_at || w.hash == ch.wfc_hash)
        })
        .map(|ch| format!("{}:{}", ch.project, ch.wfc_hash))
        .collect();
    checks.push(check("wccs_precede_fix", order));

    let report = AuditReport {
        checks,
        funnel: ws.funnel()?,
    };
    write_json(&ws.root.join("audit.json"), &report)?;
    Ok(report)
}

/// Reads a stage summary written by one of the runners.
pub fn read_summary<T: serde::de::DeserializeOwned>(stage_dir: &Path) -> Result<T> {
    read_json(&stage_dir.join("summary.json"))
}
