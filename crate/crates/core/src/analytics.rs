//! Aggregate tables and study-support computations over the weakness file.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use chrono::{DateTime, Datelike};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::ingest::{CommitRecord, ProjectRecord};
use crate::secfilter::TermMatcher;
use crate::weakness::{Weakness, WorkloadLevel};

pub const BYTES_PER_GB: f64 = 1e9;
/// Review sample size the original study reports for its 1,681 weaknesses.
pub const REPORTED_REVIEW_SAMPLE_SIZE: usize = 318;
pub const DEFAULT_GOALS: &str = include_str!("../data/goals.txt");
pub const UNCATEGORIZED: &str = "uncategorized";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum YearKey {
    #[default]
    T1,
    T2,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    #[default]
    Cwe,
    Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CweCount {
    pub cwe_id: String,
    pub count: usize,
}

/// Weakness counts per CWE, most frequent first.
pub fn cwe_distribution(weaknesses: &[Weakness]) -> Vec<CweCount> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in weaknesses {
        *counts.entry(&w.cwe_id).or_default() += 1;
    }
    let mut rows: Vec<CweCount> = counts
        .into_iter()
        .map(|(c, n)| CweCount {
            cwe_id: c.to_string(),
            count: n,
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.cwe_id.cmp(&b.cwe_id)));
    rows
}

pub fn density(count: usize, size_gb: f64) -> f64 {
    if size_gb > 0.0 {
        count as f64 / size_gb
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub category: String,
    pub size_gb: f64,
    pub count: usize,
    pub density: f64,
    /// The category's projects have no measured size.
    pub empty_category: bool,
}

fn category_name(p: Option<&ProjectRecord>) -> String {
    p.and_then(|p| p.category)
        .map(|c| c.as_str().to_string())
        .unwrap_or_else(|| UNCATEGORIZED.to_string())
}

fn project_index(projects: &[ProjectRecord]) -> BTreeMap<&str, &ProjectRecord> {
    projects.iter().map(|p| (p.id.as_str(), p)).collect()
}

/// Weaknesses per gigabyte of project content, per project category.
pub fn density_table(projects: &[ProjectRecord], weaknesses: &[Weakness]) -> Vec<DensityRow> {
    let idx = project_index(projects);
    let mut sizes: BTreeMap<String, u64> = BTreeMap::new();
    for p in projects {
        *sizes.entry(category_name(Some(p))).or_default() += p.size_bytes;
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for w in weaknesses {
        let cat = category_name(idx.get(w.project.as_str()).copied());
        sizes.entry(cat.clone()).or_default();
        *counts.entry(cat).or_default() += 1;
    }
    sizes
        .into_iter()
        .map(|(category, bytes)| {
            let size_gb = bytes as f64 / BYTES_PER_GB;
            let count = counts.get(&category).copied().unwrap_or(0);
            DensityRow {
                density: density(count, size_gb),
                empty_category: bytes == 0,
                category,
                size_gb,
                count,
            }
        })
        .collect()
}

pub fn ratio_permille(weaknesses: usize, commits: usize) -> f64 {
    if commits == 0 {
        0.0
    } else {
        1000.0 * weaknesses as f64 / commits as f64
    }
}

pub fn year_of(timestamp: i64) -> i32 {
    DateTime::from_timestamp(timestamp, 0)
        .map(|d| d.year())
        .unwrap_or(1970)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub year: i32,
    pub commits: usize,
    pub weaknesses: usize,
    pub ratio_permille: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualTrend {
    pub rows: Vec<TrendRow>,
    /// Weaknesses lacking the chosen key (untraced under T1).
    pub unattributed: usize,
}

/// Commits and weaknesses per calendar year (UTC). Weaknesses are dated by
/// their turning point by default.
pub fn annual_trend(
    commit_times: impl IntoIterator<Item = i64>,
    weaknesses: &[Weakness],
    key: YearKey,
) -> AnnualTrend {
    let mut years: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    for t in commit_times {
        years.entry(year_of(t)).or_default().0 += 1;
    }
    let mut unattributed = 0;
    for w in weaknesses {
        let t = match key {
            YearKey::T1 => w.t1,
            YearKey::T2 => Some(w.t2),
        };
        match t {
            Some(t) => years.entry(year_of(t)).or_default().1 += 1,
            None => unattributed += 1,
        }
    }
    AnnualTrend {
        rows: years
            .into_iter()
            .map(|(year, (commits, weaknesses))| TrendRow {
                year,
                commits,
                weaknesses,
                ratio_permille: ratio_permille(weaknesses, commits),
            })
            .collect(),
        unattributed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCweCell {
    pub category: String,
    pub cwe_id: String,
    pub count: usize,
    /// Share of the category's weaknesses.
    pub share: f64,
}

/// Counts of the globally most frequent `top_n` CWEs within each project
/// category, with each count's share of the category total.
pub fn category_cwe_table(
    projects: &[ProjectRecord],
    weaknesses: &[Weakness],
    top_n: usize,
) -> Vec<CategoryCweCell> {
    let top: Vec<String> = cwe_distribution(weaknesses)
        .into_iter()
        .take(top_n)
        .map(|c| c.cwe_id)
        .collect();
    let idx = project_index(projects);
    let mut per_cat: BTreeMap<String, BTreeMap<&str, usize>> = BTreeMap::new();
    for w in weaknesses {
        let cat = category_name(idx.get(w.project.as_str()).copied());
        *per_cat
            .entry(cat)
            .or_default()
            .entry(&w.cwe_id)
            .or_default() += 1;
    }
    let mut out = Vec::new();
    for (category, counts) in &per_cat {
        let total: usize = counts.values().sum();
        for cwe in &top {
            let count = counts.get(cwe.as_str()).copied().unwrap_or(0);
            out.push(CategoryCweCell {
                category: category.clone(),
                cwe_id: cwe.clone(),
                count,
                share: count as f64 / total as f64,
            });
        }
    }
    out
}

/// Minimum, quartiles and maximum with linear interpolation between order
/// statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn five_number(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(FiveNumber {
        n: v.len(),
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Insertion,
    Latency,
    Fixing,
    Lifetime,
}

impl Window {
    pub const ALL: [Window; 4] = [
        Window::Insertion,
        Window::Latency,
        Window::Fixing,
        Window::Lifetime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Window::Insertion => "insertion",
            Window::Latency => "latency",
            Window::Fixing => "fixing",
            Window::Lifetime => "lifetime",
        }
    }

    pub fn of(self, w: &Weakness) -> Option<f64> {
        let win = w.windows.unwrap_or_else(|| crate::weakness::lifecycle(w));
        match self {
            Window::Insertion => win.insertion_days,
            Window::Latency => win.latency_days,
            Window::Fixing => Some(win.fixing_days),
            Window::Lifetime => win.lifetime_days,
        }
    }
}

/// One observation in plot-ready long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowObservation {
    pub window: Window,
    pub group: String,
    pub weakness_id: String,
    pub days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: Window,
    pub group: String,
    pub summary: FiveNumber,
}

pub fn window_observations(
    projects: &[ProjectRecord],
    weaknesses: &[Weakness],
    group_by: GroupBy,
) -> Vec<WindowObservation> {
    let idx = project_index(projects);
    let mut out = Vec::new();
    for window in Window::ALL {
        for w in weaknesses {
            let Some(days) = window.of(w) else { continue };
            let group = match group_by {
                GroupBy::Cwe => w.cwe_id.clone(),
                GroupBy::Category => category_name(idx.get(w.project.as_str()).copied()),
            };
            out.push(WindowObservation {
                window,
                group,
                weakness_id: w.id.clone(),
                days,
            });
        }
    }
    out
}

pub fn window_distributions(observations: &[WindowObservation]) -> Vec<WindowSummary> {
    let mut groups: BTreeMap<(Window, &str), Vec<f64>> = BTreeMap::new();
    for o in observations {
        groups.entry((o.window, &o.group)).or_default().push(o.days);
    }
    groups
        .into_iter()
        .filter_map(|((window, group), v)| {
            five_number(&v).map(|summary| WindowSummary {
                window,
                group: group.to_string(),
                summary,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixStats {
    pub additions_only: usize,
    pub deletions_only: usize,
    pub both: usize,
    /// Fixes with no line changes at all (binary or pure renames).
    pub neither: usize,
    pub lines_changed: Option<FiveNumber>,
    pub files_changed: Option<FiveNumber>,
}

pub fn fix_change_stats(fixes: &[&CommitRecord]) -> FixStats {
    let mut s = FixStats {
        additions_only: 0,
        deletions_only: 0,
        both: 0,
        neither: 0,
        lines_changed: None,
        files_changed: None,
    };
    let mut lines = Vec::with_capacity(fixes.len());
    let mut files = Vec::with_capacity(fixes.len());
    for c in fixes {
        let added: u64 = c.changes.iter().map(|f| f.lines_added).sum();
        let deleted: u64 = c.changes.iter().map(|f| f.lines_deleted).sum();
        match (added > 0, deleted > 0) {
            (true, false) => s.additions_only += 1,
            (false, true) => s.deletions_only += 1,
            (true, true) => s.both += 1,
            (false, false) => s.neither += 1,
        }
        lines.push((added + deleted) as f64);
        files.push(c.changes.len() as f64);
    }
    s.lines_changed = five_number(&lines);
    s.files_changed = five_number(&files);
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryRow {
    pub library: String,
    pub project: String,
    pub affected_files: usize,
    pub weaknesses: usize,
    /// Distinct first WCCs over every project using the library.
    pub first_wccs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryAttribution {
    pub rows: Vec<LibraryRow>,
    /// Weaknesses touching no library path (developer-authored code).
    pub unattributed: usize,
}

fn under_prefix(path: &str, prefixes: &[String]) -> bool {
    prefixes.iter().any(|p| path.starts_with(p.as_str()))
}

pub fn library_attribution(
    weaknesses: &[Weakness],
    library_paths: &BTreeMap<String, Vec<String>>,
) -> LibraryAttribution {
    let mut rows = Vec::new();
    let mut attributed: HashSet<&str> = HashSet::new();
    for (library, prefixes) in library_paths {
        let mut per_project: BTreeMap<&str, (BTreeSet<&str>, usize)> = BTreeMap::new();
        let mut first_wccs: BTreeSet<&str> = BTreeSet::new();
        for w in weaknesses {
            let hit: Vec<&str> = w
                .files
                .iter()
                .map(String::as_str)
                .filter(|f| under_prefix(f, prefixes))
                .collect();
            if hit.is_empty() {
                continue;
            }
            attributed.insert(&w.id);
            let e = per_project.entry(&w.project).or_default();
            e.0.extend(hit);
            e.1 += 1;
            if let Some(first) = w.chain.as_ref().and_then(|c| c.earliest()) {
                first_wccs.insert(&first.hash);
            }
        }
        for (project, (files, n)) in per_project {
            rows.push(LibraryRow {
                library: library.clone(),
                project: project.to_string(),
                affected_files: files.len(),
                weaknesses: n,
                first_wccs: first_wccs.len(),
            });
        }
    }
    LibraryAttribution {
        rows,
        unattributed: weaknesses.len() - attributed.len(),
    }
}

/// Parses `library = prefix, prefix` lines; `#` starts a comment.
pub fn parse_library_paths(text: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, prefixes) = line.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!(
                "library map line {}: expected name = prefixes",
                i + 1
            ))
        })?;
        let prefixes: Vec<String> = prefixes
            .split(',')
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty())
            .collect();
        out.insert(name.trim().to_string(), prefixes);
    }
    Ok(out)
}

pub struct GoalLexicon {
    goals: BTreeMap<String, Vec<TermMatcher>>,
}

impl GoalLexicon {
    pub const GOALS: [&'static str; 4] =
        ["new_feature", "enhancement", "refactoring", "bug_fixing"];

    /// Section headers name the goal; each following line is a term.
    pub fn parse(text: &str) -> Result<Self> {
        let mut goals: BTreeMap<String, Vec<TermMatcher>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if !Self::GOALS.contains(&name) {
                    return Err(Error::LexiconInvalid(format!(
                        "unknown goal section [{name}]"
                    )));
                }
                goals.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let goal = current.as_ref().ok_or_else(|| {
                Error::LexiconInvalid(format!("line {}: term outside a section", i + 1))
            })?;
            goals
                .get_mut(goal)
                .expect("section registered")
                .push(TermMatcher::new(line));
        }
        Ok(GoalLexicon { goals })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_GOALS).expect("bundled goal lexicon is valid")
    }

    /// Every goal whose lexicon matches the message.
    pub fn tag(&self, message: &str) -> Vec<&str> {
        let lowered = message.to_lowercase();
        self.goals
            .iter()
            .filter(|(_, terms)| terms.iter().any(|t| t.is_match(message, &lowered)))
            .map(|(g, _)| g.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalCounts {
    pub counts: BTreeMap<String, usize>,
    pub messages: usize,
    pub untagged: usize,
}

pub fn goal_tagging<'a>(
    messages: impl IntoIterator<Item = &'a str>,
    lexicon: &GoalLexicon,
) -> GoalCounts {
    let mut counts: BTreeMap<String, usize> = GoalLexicon::GOALS
        .iter()
        .map(|g| (g.to_string(), 0))
        .collect();
    let (mut messages_n, mut untagged) = (0, 0);
    for m in messages {
        messages_n += 1;
        let tags = lexicon.tag(m);
        if tags.is_empty() {
            untagged += 1;
        }
        for t in tags {
            *counts.entry(t.to_string()).or_default() += 1;
        }
    }
    GoalCounts {
        counts,
        messages: messages_n,
        untagged,
    }
}

pub fn z_score(confidence: f64) -> Result<f64> {
    const TABLE: [(f64, f64); 3] = [(0.90, 1.6449), (0.95, 1.96), (0.99, 2.576)];
    TABLE
        .iter()
        .find(|(c, _)| (c - confidence).abs() < 1e-9)
        .map(|&(_, z)| z)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "confidence {confidence} not one of 0.90, 0.95, 0.99"
            ))
        })
}

/// Cochran's sample size for a proportion at p = 0.5, with finite-population
/// correction when `population` is given, rounded up.
pub fn cochran_sample_size(
    population: Option<usize>,
    confidence: f64,
    margin: f64,
) -> Result<usize> {
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "margin {margin} outside (0, 1]"
        )));
    }
    let z = z_score(confidence)?;
    let n0 = z * z * 0.25 / (margin * margin);
    let n = match population {
        Some(0) => {
            return Err(Error::PopulationTooSmall {
                needed: 1,
                population: 0,
            })
        }
        Some(big_n) => n0 / (1.0 + (n0 - 1.0) / big_n as f64),
        None => n0,
    };
    // Guard against representation noise pushing an exact integer up by one.
    let n = ((n - 1e-9).ceil() as usize).max(1);
    if let Some(big_n) = population {
        if n > big_n {
            return Err(Error::PopulationTooSmall {
                needed: n,
                population: big_n,
            });
        }
    }
    Ok(n)
}

/// Draws a uniform sample without replacement, reproducible from `seed`.
/// Returned indices are ascending.
pub fn sample_indices(population: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size > population {
        return Err(Error::PopulationTooSmall {
            needed: size,
            population,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = index::sample(&mut rng, population, size).into_vec();
    v.sort_unstable();
    Ok(v)
}

/// Sample of weakness ids for manual verification.
pub fn sample_for_review(
    ids: &[String],
    confidence: f64,
    margin: f64,
    seed: u64,
) -> Result<Vec<String>> {
    let size = cochran_sample_size(Some(ids.len()), confidence, margin)?;
    Ok(sample_indices(ids.len(), size, seed)?
        .into_iter()
        .map(|i| ids[i].clone())
        .collect())
}

pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument(
            "kappa needs at least one label pair".into(),
        ));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let mut ma: BTreeMap<&T, f64> = BTreeMap::new();
    let mut mb: BTreeMap<&T, f64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x).or_default() += 1.0;
        *mb.entry(y).or_default() += 1.0;
    }
    let p_o = agree / n;
    let p_e: f64 = ma
        .iter()
        .map(|(k, ca)| ca * mb.get(k).copied().unwrap_or(0.0))
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(if p_o == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCount {
    pub dimension: String,
    pub level: String,
    pub count: usize,
}

fn level_name<T: Serialize>(level: T) -> String {
    serde_json::to_value(level)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Level counts over distinct WCCs for each developer-status dimension.
pub fn developer_breakdown(weaknesses: &[Weakness]) -> Vec<LevelCount> {
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut counts: BTreeMap<(&str, String), usize> = BTreeMap::new();
    for w in weaknesses {
        for d in &w.wcc_developers {
            if !seen.insert((&w.project, &d.commit_hash)) {
                continue;
            }
            let wl = |l: WorkloadLevel| level_name(l);
            *counts
                .entry(("wl_commit", wl(d.wl_commit_level)))
                .or_default() += 1;
            *counts.entry(("wl_code", wl(d.wl_code_level))).or_default() += 1;
            *counts.entry(("exp", level_name(d.exp_level))).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|((dimension, level), count)| LevelCount {
            dimension: dimension.to_string(),
            level,
            count,
        })
        .collect()
}

pub fn introduction_phase_counts(weaknesses: &[Weakness]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for w in weaknesses {
        *out.entry(level_name(w.introduction_phase)).or_default() += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub group_by: GroupBy,
    pub year_key: YearKey,
}

pub struct ReportInput<'a> {
    pub projects: &'a [ProjectRecord],
    pub histories: &'a BTreeMap<String, Vec<CommitRecord>>,
    pub weaknesses: &'a [Weakness],
    pub library_paths: &'a BTreeMap<String, Vec<String>>,
    pub goals: &'a GoalLexicon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub options: ReportOptions,
    pub weakness_count: usize,
    pub cwe_distribution: Vec<CweCount>,
    pub density_table: Vec<DensityRow>,
    pub annual_trend: AnnualTrend,
    pub category_cwe_table: Vec<CategoryCweCell>,
    pub fix_stats: FixStats,
    pub library_table: LibraryAttribution,
    pub goal_counts: GoalCounts,
    pub introduction_phases: BTreeMap<String, usize>,
    pub developer_breakdown: Vec<LevelCount>,
    pub window_summaries: Vec<WindowSummary>,
    pub review_sample_size: Option<usize>,
    pub reported_review_sample_size: usize,
}

pub fn build_report(
    input: &ReportInput<'_>,
    options: ReportOptions,
) -> (ReportBundle, Vec<WindowObservation>) {
    let ws = input.weaknesses;
    let commit_at = |project: &str, hash: &str| {
        input
            .histories
            .get(project)
            .and_then(|h| h.iter().find(|c| c.hash == hash))
    };

    let mut fix_commits = Vec::new();
    let mut wcc_seen: BTreeSet<(&str, &str)> = BTreeSet::new();
    for w in ws {
        fix_commits.extend(
            w.fixes
                .iter()
                .filter_map(|f| commit_at(&w.project, &f.hash)),
        );
        for c in w.chain.iter().flat_map(|c| &c.wccs) {
            wcc_seen.insert((&w.project, &c.hash));
        }
    }
    let wcc_messages: Vec<&str> = wcc_seen
        .iter()
        .filter_map(|(p, h)| commit_at(p, h))
        .map(|c| c.message.as_str())
        .collect();

    let observations = window_observations(input.projects, ws, options.group_by);
    let bundle = ReportBundle {
        options,
        weakness_count: ws.len(),
        cwe_distribution: cwe_distribution(ws),
        density_table: density_table(input.projects, ws),
        annual_trend: annual_trend(
            input.histories.values().flatten().map(|c| c.authored_at),
            ws,
            options.year_key,
        ),
        category_cwe_table: category_cwe_table(input.projects, ws, 10),
        fix_stats: fix_change_stats(&fix_commits),
        library_table: library_attribution(ws, input.library_paths),
        goal_counts: goal_tagging(wcc_messages, input.goals),
        introduction_phases: introduction_phase_counts(ws),
        developer_breakdown: developer_breakdown(ws),
        window_summaries: window_distributions(&observations),
        review_sample_size: cochran_sample_size(Some(ws.len()), 0.95, 0.05).ok(),
        reported_review_sample_size: REPORTED_REVIEW_SAMPLE_SIZE,
    };
    (bundle, observations)
}

fn csv_file(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(dir.join(name))?)
}

fn two(x: f64) -> String {
    format!("{x:.2}")
}

/// Writes one CSV per table (display rounding) plus `bundle.json` (full
/// precision) and the long-format window observations.
pub fn write_report(
    bundle: &ReportBundle,
    observations: &[WindowObservation],
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut w = csv_file(dir, "cwe_distribution.csv")?;
    w.write_record(["cwe_id", "count"])?;
    for r in &bundle.cwe_distribution {
        w.write_record([r.cwe_id.clone(), r.count.to_string()])?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "density.csv")?;
    w.write_record(["category", "size_gb", "count", "density", "empty_category"])?;
    for r in &bundle.density_table {
        w.write_record([
            r.category.clone(),
            r.size_gb.to_string(),
            r.count.to_string(),
            two(r.density),
            r.empty_category.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "annual_trend.csv")?;
    w.write_record(["year", "commits", "weaknesses", "ratio_permille"])?;
    for r in &bundle.annual_trend.rows {
        w.write_record([
            r.year.to_string(),
            r.commits.to_string(),
            r.weaknesses.to_string(),
            two(r.ratio_permille),
        ])?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "category_cwe.csv")?;
    w.write_record(["category", "cwe_id", "count", "share_percent"])?;
    for r in &bundle.category_cwe_table {
        w.write_record([
            r.category.clone(),
            r.cwe_id.clone(),
            r.count.to_string(),
            two(100.0 * r.share),
        ])?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "fix_stats.csv")?;
    w.write_record(["kind", "count"])?;
    let f = &bundle.fix_stats;
    for (k, n) in [
        ("additions_only", f.additions_only),
        ("deletions_only", f.deletions_only),
        ("both", f.both),
        ("neither", f.neither),
    ] {
        w.write_record([k.to_string(), n.to_string()])?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "libraries.csv")?;
    w.write_record([
        "library",
        "project",
        "affected_files",
        "weaknesses",
        "first_wccs",
    ])?;
    for r in &bundle.library_table.rows {
        w.write_record([
            r.library.clone(),
            r.project.clone(),
            r.affected_files.to_string(),
            r.weaknesses.to_string(),
            r.first_wccs.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "goals.csv")?;
    w.write_record(["goal", "count"])?;
    for (g, n) in &bundle.goal_counts.counts {
        w.write_record([g.clone(), n.to_string()])?;
    }
    w.write_record([
        "untagged".to_string(),
        bundle.goal_counts.untagged.to_string(),
    ])?;
    w.flush()?;

    let mut w = csv_file(dir, "developer_status.csv")?;
    w.write_record(["dimension", "level", "count"])?;
    for r in &bundle.developer_breakdown {
        w.write_record([r.dimension.clone(), r.level.clone(), r.count.to_string()])?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "window_summary.csv")?;
    w.write_record(["window", "group", "n", "min", "q1", "median", "q3", "max"])?;
    for r in &bundle.window_summaries {
        let s = &r.summary;
        let day = |x: f64| format!("{}", x.round());
        w.write_record([
            r.window.as_str().to_string(),
            r.group.clone(),
            s.n.to_string(),
            day(s.min),
            day(s.q1),
            day(s.median),
            day(s.q3),
            day(s.max),
        ])?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "windows_long.csv")?;
    w.write_record(["window", "group", "weakness_id", "days"])?;
    for o in observations {
        w.write_record([
            o.window.as_str().to_string(),
            o.group.clone(),
            o.weakness_id.clone(),
            o.days.to_string(),
        ])?;
    }
    w.flush()?;

    artifact::write_json(&dir.join("bundle.json"), bundle)
}
