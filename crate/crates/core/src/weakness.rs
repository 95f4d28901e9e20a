//! Weakness entities: deduplication of fixing commits by WCC-chain
//! inclusion, lifecycle points and windows, and developer attributes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ChangeType, CommitRecord, SECONDS_PER_DAY};
use crate::szz::WccChain;
use crate::wfc::WfcAssignment;

pub const WORKLOAD_WINDOW_SECONDS: i64 = 30 * 86_400;
pub const LOW_THRESHOLD: f64 = 0.25;
pub const HIGH_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fix {
    pub authored_at: i64,
    pub hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadLevel {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperienceLevel {
    Newcomer,
    Medium,
    Expert,
}

/// Position of a ratio relative to the 0.25 / 0.75 cut points; the middle
/// band is closed on both ends.
fn band(x: f64) -> u8 {
    if x < LOW_THRESHOLD {
        0
    } else if x <= HIGH_THRESHOLD {
        1
    } else {
        2
    }
}

impl WorkloadLevel {
    pub fn of(x: f64) -> Self {
        [
            WorkloadLevel::Low,
            WorkloadLevel::Medium,
            WorkloadLevel::High,
        ][band(x) as usize]
    }
}

impl ExperienceLevel {
    pub fn of(x: f64) -> Self {
        [
            ExperienceLevel::Newcomer,
            ExperienceLevel::Medium,
            ExperienceLevel::Expert,
        ][band(x) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeveloperStatus {
    pub author_id: String,
    pub commit_hash: String,
    pub wl_commit: f64,
    pub wl_commit_level: WorkloadLevel,
    pub wl_code: f64,
    pub wl_code_level: WorkloadLevel,
    pub exp: f64,
    pub exp_level: ExperienceLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntroductionPhase {
    Creation,
    Maintenance,
    Both,
    Unknown,
}

/// Window lengths in (fractional) days. Windows that need the WCC chain are
/// unavailable for untraced weaknesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifecycleWindows {
    pub insertion_days: Option<f64>,
    pub latency_days: Option<f64>,
    pub fixing_days: f64,
    pub lifetime_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weakness {
    pub id: String,
    pub project: String,
    pub cwe_id: String,
    /// Every fixing commit merged into this weakness, oldest first.
    pub fixes: Vec<Fix>,
    /// Chain of the latest fix; absent for untraced fixes.
    pub chain: Option<WccChain>,
    pub t0: Option<i64>,
    pub t1: Option<i64>,
    pub t2: i64,
    pub t3: i64,
    #[serde(default)]
    pub files: BTreeSet<String>,
    #[serde(default)]
    pub windows: Option<LifecycleWindows>,
    #[serde(default)]
    pub developer: Option<DeveloperStatus>,
    #[serde(default)]
    pub wcc_developers: Vec<DeveloperStatus>,
    #[serde(default = "unknown_phase")]
    pub introduction_phase: IntroductionPhase,
}

fn unknown_phase() -> IntroductionPhase {
    IntroductionPhase::Unknown
}

impl Weakness {
    fn from_fix(assignment: &WfcAssignment, chain: Option<WccChain>, authored_at: i64) -> Self {
        let mut w = Weakness {
            id: String::new(),
            project: assignment.project.clone(),
            cwe_id: assignment.assigned_cwe().unwrap_or_default().to_string(),
            fixes: vec![Fix {
                authored_at,
                hash: assignment.commit_hash.clone(),
            }],
            chain: chain.filter(|c| c.traced),
            t0: None,
            t1: None,
            t2: authored_at,
            t3: authored_at,
            files: BTreeSet::new(),
            windows: None,
            developer: None,
            wcc_developers: Vec::new(),
            introduction_phase: IntroductionPhase::Unknown,
        };
        w.refresh_points();
        w
    }

    pub fn latest_fix(&self) -> &Fix {
        self.fixes.last().expect("a weakness has at least one fix")
    }

    pub fn is_traced(&self) -> bool {
        self.chain.is_some()
    }

    fn chain_hashes(&self) -> HashSet<&str> {
        self.chain
            .iter()
            .flat_map(|c| c.wccs.iter().map(|w| w.hash.as_str()))
            .collect()
    }

    /// Recomputes id and T0..T3 from fixes and chain.
    fn refresh_points(&mut self) {
        self.fixes.sort();
        self.fixes.dedup();
        let latest = self.latest_fix().clone();
        self.id = format!(
            "{}:{}",
            self.project,
            &latest.hash[..latest.hash.len().min(12)]
        );
        self.t2 = self.fixes[0].authored_at;
        self.t3 = latest.authored_at;
        match &self.chain {
            Some(c) if !c.wccs.is_empty() => {
                let t0 = c.wccs[0].authored_at;
                // The turning point is the last contribution before the weakness
                // is first exposed; later WCCs of a merged chain re-touch code
                // after the first fix.
                let t1 = c
                    .wccs
                    .iter()
                    .map(|w| w.authored_at)
                    .filter(|&t| t <= self.t2)
                    .max()
                    .unwrap_or(t0);
                self.t0 = Some(t0);
                self.t1 = Some(t1.max(t0));
            }
            _ => {
                self.t0 = None;
                self.t1 = None;
            }
        }
    }
}

/// True when one chain is contained in the other and both start at the same
/// earliest WCC.
fn same_weakness(a: &Weakness, b: &Weakness) -> bool {
    let (Some(ca), Some(cb)) = (&a.chain, &b.chain) else {
        return false;
    };
    if a.project != b.project {
        return false;
    }
    match (ca.earliest(), cb.earliest()) {
        (Some(ea), Some(eb)) if ea.hash == eb.hash => {}
        _ => return false,
    }
    let (sa, sb) = (a.chain_hashes(), b.chain_hashes());
    sa.is_subset(&sb) || sb.is_subset(&sa)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Merges weaknesses whose chains are nested and share the earliest WCC,
/// transitively. Within each merged group the weakness with the latest fix
/// survives and the others become historical fixes of it.
pub fn merge_weaknesses(mut items: Vec<Weakness>) -> Vec<Weakness> {
    items.sort_by(|a, b| (&a.project, a.latest_fix()).cmp(&(&b.project, b.latest_fix())));
    let n = items.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut by_project: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, w) in items.iter().enumerate() {
        by_project.entry(&w.project).or_default().push(i);
    }
    for idxs in by_project.values() {
        for (k, &i) in idxs.iter().enumerate() {
            for &j in &idxs[k + 1..] {
                if same_weakness(&items[i], &items[j]) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.min(rj)] = ri.max(rj);
                    }
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut slots: Vec<Option<Weakness>> = items.into_iter().map(Some).collect();
    let mut out = Vec::with_capacity(groups.len());
    for members in groups.values() {
        // Members are in canonical order, so the last one has the latest fix.
        let survivor_idx = *members.last().expect("non-empty group");
        let mut survivor = slots[survivor_idx].take().expect("each index used once");
        for &m in &members[..members.len() - 1] {
            let merged = slots[m].take().expect("each index used once");
            survivor.fixes.extend(merged.fixes);
        }
        survivor.refresh_points();
        out.push(survivor);
    }
    out.sort_by(|a, b| (&a.project, a.latest_fix()).cmp(&(&b.project, b.latest_fix())));
    out
}

/// Turns classified, traced fixes into deduplicated weaknesses. Fixes whose
/// chain is missing or untraced pass through as single-fix weaknesses.
pub fn deduplicate(items: &[(WfcAssignment, Option<WccChain>, i64)]) -> Vec<Weakness> {
    let singles = items
        .iter()
        .filter(|(a, _, _)| a.assigned_cwe().is_some())
        .map(|(a, c, t)| Weakness::from_fix(a, c.clone(), *t))
        .collect();
    merge_weaknesses(singles)
}

pub fn days(seconds: i64) -> f64 {
    seconds as f64 / SECONDS_PER_DAY
}

pub fn lifecycle(w: &Weakness) -> LifecycleWindows {
    LifecycleWindows {
        insertion_days: w.t0.zip(w.t1).map(|(t0, t1)| days(t1 - t0)),
        latency_days: w.t1.map(|t1| days(w.t2 - t1)),
        fixing_days: days(w.t3 - w.t2),
        lifetime_days: w.t1.map(|t1| days(w.t3 - t1)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub wl_commit: f64,
    pub wl_code: f64,
    /// No commits (or no changed lines) in the window; the ratio is reported as 0.
    pub empty_commit_window: bool,
    pub empty_code_window: bool,
}

/// Commit and line-change share of `author` over `(at - 30 days, at]`.
/// `history` must be sorted by `authored_at`.
pub fn workload(author: &str, at: i64, history: &[CommitRecord]) -> Workload {
    let lo = history.partition_point(|c| c.authored_at <= at - WORKLOAD_WINDOW_SECONDS);
    let hi = history.partition_point(|c| c.authored_at <= at);
    let window = &history[lo..hi.max(lo)];
    let (mut mine, mut all, mut my_lines, mut all_lines) = (0u64, 0u64, 0u64, 0u64);
    for c in window {
        let lines = c.lines_changed();
        all += 1;
        all_lines += lines;
        if c.author_id == author {
            mine += 1;
            my_lines += lines;
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Workload {
        wl_commit: ratio(mine, all),
        wl_code: ratio(my_lines, all_lines),
        empty_commit_window: all == 0,
        empty_code_window: all_lines == 0,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExpDenominator {
    /// Sum of every author's tenure up to the query time.
    #[default]
    Sum,
    /// Longest single tenure up to the query time.
    Max,
}

/// Share of contribution time: the author's tenure at `at` relative to all
/// authors' tenures, clipped to [0, 1]. `history` must be sorted by time.
pub fn experience(
    author: &str,
    at: i64,
    history: &[CommitRecord],
    mode: ExpDenominator,
) -> Result<f64> {
    let end = history.partition_point(|c| c.authored_at <= at);
    let mut spans: HashMap<&str, (i64, i64)> = HashMap::new();
    for c in &history[..end] {
        let e = spans
            .entry(c.author_id.as_str())
            .or_insert((c.authored_at, c.authored_at));
        e.0 = e.0.min(c.authored_at);
        e.1 = e.1.max(c.authored_at);
    }
    let (first, _) = *spans
        .get(author)
        .ok_or_else(|| Error::UnknownAuthor(author.to_string()))?;
    let tenure = (at - first) as f64;
    let tenures = spans.values().map(|(f, l)| (l.min(&at) - f) as f64);
    let denom = match mode {
        ExpDenominator::Sum => tenures.sum::<f64>(),
        ExpDenominator::Max => tenures.fold(0.0, f64::max),
    };
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((tenure / denom).clamp(0.0, 1.0))
}

pub fn developer_status(
    author: &str,
    commit_hash: &str,
    at: i64,
    history: &[CommitRecord],
    mode: ExpDenominator,
) -> Result<DeveloperStatus> {
    let wl = workload(author, at, history);
    let exp = experience(author, at, history, mode)?;
    Ok(DeveloperStatus {
        author_id: author.to_string(),
        commit_hash: commit_hash.to_string(),
        wl_commit: wl.wl_commit,
        wl_commit_level: WorkloadLevel::of(wl.wl_commit),
        wl_code: wl.wl_code,
        wl_code_level: WorkloadLevel::of(wl.wl_code),
        exp,
        exp_level: ExperienceLevel::of(exp),
    })
}

/// Classifies the first WCC's file changes: all added → creation, none added
/// → maintenance, mixed → both. Unknown when the commit or the creation time
/// of any touched file is unavailable.
pub fn introduction_phase(
    first_wcc: Option<&CommitRecord>,
    file_creation_times: &HashMap<String, i64>,
) -> IntroductionPhase {
    let Some(commit) = first_wcc else {
        return IntroductionPhase::Unknown;
    };
    if commit.changes.is_empty()
        || commit
            .changes
            .iter()
            .any(|c| !file_creation_times.contains_key(&c.path))
    {
        return IntroductionPhase::Unknown;
    }
    let added = commit
        .changes
        .iter()
        .filter(|c| c.change_type == ChangeType::Added)
        .count();
    match added {
        0 => IntroductionPhase::Maintenance,
        n if n == commit.changes.len() => IntroductionPhase::Creation,
        _ => IntroductionPhase::Both,
    }
}

/// Lookup structures over one project's sorted history.
pub struct HistoryIndex<'a> {
    pub commits: &'a [CommitRecord],
    by_hash: HashMap<&'a str, &'a CommitRecord>,
    creation_times: HashMap<String, i64>,
}

impl<'a> HistoryIndex<'a> {
    pub fn new(commits: &'a [CommitRecord]) -> Self {
        let by_hash = commits.iter().map(|c| (c.hash.as_str(), c)).collect();
        let mut creation_times = HashMap::new();
        for c in commits {
            for ch in &c.changes {
                if matches!(ch.change_type, ChangeType::Added | ChangeType::Renamed) {
                    creation_times
                        .entry(ch.path.clone())
                        .or_insert(c.authored_at);
                }
            }
        }
        HistoryIndex {
            commits,
            by_hash,
            creation_times,
        }
    }

    pub fn get(&self, hash: &str) -> Option<&'a CommitRecord> {
        self.by_hash.get(hash).copied()
    }

    pub fn creation_times(&self) -> &HashMap<String, i64> {
        &self.creation_times
    }
}

/// Fills files, lifecycle windows, developer attributes and introduction phase.
pub fn enrich(w: &mut Weakness, history: &HistoryIndex<'_>, mode: ExpDenominator) {
    let mut files = BTreeSet::new();
    let chain_hashes: Vec<&str> = w
        .chain
        .iter()
        .flat_map(|c| c.wccs.iter().map(|x| x.hash.as_str()))
        .collect();
    for hash in w
        .fixes
        .iter()
        .map(|f| f.hash.as_str())
        .chain(chain_hashes.iter().copied())
    {
        if let Some(c) = history.get(hash) {
            files.extend(c.changes.iter().map(|ch| ch.path.clone()));
        }
    }
    w.files = files;
    w.windows = Some(lifecycle(w));

    w.wcc_developers = chain_hashes
        .iter()
        .filter_map(|h| history.get(h))
        .filter_map(|c| {
            developer_status(&c.author_id, &c.hash, c.authored_at, history.commits, mode).ok()
        })
        .collect();
    w.developer = w
        .chain
        .as_ref()
        .and_then(|c| c.earliest())
        .and_then(|first| {
            w.wcc_developers
                .iter()
                .find(|d| d.commit_hash == first.hash)
        })
        .cloned();
    let first_commit = w
        .chain
        .as_ref()
        .and_then(|c| c.earliest())
        .and_then(|e| history.get(&e.hash));
    w.introduction_phase = introduction_phase(first_commit, history.creation_times());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::szz::Wcc;
    use crate::wfc::Decision;

    const DAY: i64 = 86_400;

    fn assignment(hash: &str, cwe: &str) -> WfcAssignment {
        WfcAssignment {
            project: "p".into(),
            commit_hash: hash.into(),
            decision: Decision::Assigned(cwe.into()),
            votes: BTreeMap::new(),
            scores: vec![],
            gate_passed: true,
            review_cause: None,
        }
    }

    fn chain(wfc: &str, wfc_at: i64, wccs: &[(&str, i64)]) -> WccChain {
        WccChain {
            project: "p".into(),
            wfc_hash: wfc.into(),
            wfc_authored_at: wfc_at,
            wccs: wccs
                .iter()
                .map(|(h, t)| Wcc {
                    hash: h.to_string(),
                    authored_at: *t,
                })
                .collect(),
            traced: !wccs.is_empty(),
            untraceable_reason: None,
            failures: vec![],
        }
    }

    fn item(wfc: &str, at: i64, wccs: &[(&str, i64)]) -> (WfcAssignment, Option<WccChain>, i64) {
        (assignment(wfc, "CWE-1219"), Some(chain(wfc, at, wccs)), at)
    }

    #[test]
    fn disjoint_and_identical_chains() {
        let out = deduplicate(&[item("f1", 10, &[("a", 1)]), item("f2", 20, &[("b", 2)])]);
        assert_eq!(out.len(), 2);

        let out = deduplicate(&[
            item("f1", 10, &[("a", 1), ("b", 2)]),
            item("f2", 20, &[("a", 1), ("b", 2)]),
        ]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].fixes.len(), 2);
        assert_eq!(out[0].latest_fix().hash, "f2");
        assert_eq!((out[0].t2, out[0].t3), (10, 20));
    }

    #[test]
    fn untraced_fixes_pass_through() {
        let (a, _, t) = item("f1", 10, &[]);
        let out = deduplicate(&[
            (a.clone(), None, t),
            (a.clone(), Some(chain("f1", 10, &[])), t),
        ]);
        // Identical fix records collapse only through dedup of fixes, not chains.
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|w| !w.is_traced() && w.t0.is_none()));
        let rejected = WfcAssignment {
            decision: Decision::NeedsReview,
            ..a
        };
        assert!(deduplicate(&[(rejected, None, 1)]).is_empty());
    }

    #[test]
    fn turning_point_never_after_first_fix() {
        // The later fix's chain picked up a WCC made after the first fix.
        let out = deduplicate(&[
            item("f1", 10 * DAY, &[("a", DAY)]),
            item("f2", 20 * DAY, &[("a", DAY), ("b", 15 * DAY)]),
        ]);
        assert_eq!(out.len(), 1);
        let w = &out[0];
        assert_eq!(
            (w.t0, w.t1, w.t2, w.t3),
            (Some(DAY), Some(DAY), 10 * DAY, 20 * DAY)
        );
        let win = lifecycle(w);
        assert!(win.latency_days.unwrap() >= 0.0);
    }

    #[test]
    fn lifecycle_examples() {
        let mut w = deduplicate(&[item("f", 5 * DAY, &[("a", 0), ("b", 2 * DAY)])]).remove(0);
        let win = lifecycle(&w);
        assert_eq!(win.insertion_days, Some(2.0));
        assert_eq!(win.latency_days, Some(3.0));
        assert_eq!(win.fixing_days, 0.0);
        assert_eq!(win.lifetime_days, win.latency_days);

        w.fixes.push(Fix {
            authored_at: 9 * DAY,
            hash: "g".into(),
        });
        w.refresh_points();
        let win = lifecycle(&w);
        assert_eq!(
            (
                win.insertion_days,
                win.latency_days,
                Some(win.fixing_days),
                win.lifetime_days
            ),
            (Some(2.0), Some(3.0), Some(4.0), Some(7.0))
        );

        let single = deduplicate(&[item("f", 5 * DAY, &[("a", DAY)])]).remove(0);
        let win = lifecycle(&single);
        assert_eq!(win.insertion_days, Some(0.0));
        assert_eq!(win.latency_days, win.lifetime_days);
    }

    fn commit(hash: &str, author: &str, at: i64, lines: u64) -> CommitRecord {
        use crate::ingest::FileChange;
        CommitRecord {
            hash: hash.into(),
            author_id: author.into(),
            authored_at: at,
            message: String::new(),
            parents: vec![],
            changes: vec![FileChange {
                path: "f".into(),
                old_path: None,
                change_type: ChangeType::Modified,
                binary: false,
                lines_added: lines,
                lines_deleted: 0,
                hunks: vec![],
            }],
        }
    }

    #[test]
    fn workload_examples() {
        let mut h: Vec<_> = (0..8)
            .map(|i| commit(&format!("a{i}"), "ann", 100 + i, 25))
            .collect();
        h.push(commit("b0", "bob", 200, 400));
        h.push(commit("b1", "bob", 201, 400));
        let wl = workload("ann", 300, &h);
        assert_eq!(wl.wl_commit, 0.8);
        assert_eq!(WorkloadLevel::of(wl.wl_commit), WorkloadLevel::High);
        assert_eq!(wl.wl_code, 0.2);
        assert_eq!(WorkloadLevel::of(wl.wl_code), WorkloadLevel::Low);

        let wl = workload("carl", 300, &h);
        assert_eq!(wl.wl_commit, 0.0);
        assert_eq!(WorkloadLevel::of(0.0), WorkloadLevel::Low);

        // Commits at or before at - 30 days fall outside the window.
        let wl = workload("ann", 100 + WORKLOAD_WINDOW_SECONDS, &h);
        assert_eq!(wl.wl_commit, 7.0 / 9.0);
        let wl = workload("ann", 10 * WORKLOAD_WINDOW_SECONDS, &h);
        assert!(wl.empty_commit_window && wl.wl_commit == 0.0);
    }

    #[test]
    fn level_boundaries() {
        assert_eq!(WorkloadLevel::of(0.2499), WorkloadLevel::Low);
        assert_eq!(WorkloadLevel::of(0.25), WorkloadLevel::Medium);
        assert_eq!(WorkloadLevel::of(0.75), WorkloadLevel::Medium);
        assert_eq!(WorkloadLevel::of(0.7501), WorkloadLevel::High);
        assert_eq!(ExperienceLevel::of(0.25), ExperienceLevel::Medium);
        assert_eq!(ExperienceLevel::of(0.76), ExperienceLevel::Expert);
    }

    #[test]
    fn experience_examples() {
        let solo = vec![commit("a", "ann", 0, 1), commit("b", "ann", 50 * DAY, 1)];
        assert_eq!(
            experience("ann", 50 * DAY, &solo, ExpDenominator::Sum).unwrap(),
            1.0
        );

        let joined = vec![commit("a", "ann", 0, 1), commit("b", "bob", 50 * DAY, 1)];
        let e = experience("bob", 50 * DAY, &joined, ExpDenominator::Sum).unwrap();
        assert_eq!(e, 0.0);
        assert_eq!(ExperienceLevel::of(e), ExperienceLevel::Newcomer);

        let two = vec![
            commit("b0", "bob", 0, 1),
            commit("a0", "ann", 60 * DAY, 1),
            commit("b1", "bob", 90 * DAY, 1),
            commit("a1", "ann", 90 * DAY, 1),
        ];
        let e = experience("ann", 90 * DAY, &two, ExpDenominator::Sum).unwrap();
        assert_eq!(e, 0.25);
        assert_eq!(ExperienceLevel::of(e), ExperienceLevel::Medium);
        let e = experience("ann", 90 * DAY, &two, ExpDenominator::Max).unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-15);

        assert!(matches!(
            experience("zed", 90 * DAY, &two, ExpDenominator::Sum),
            Err(Error::UnknownAuthor(_))
        ));
    }

    #[test]
    fn introduction_phase_examples() {
        use crate::ingest::FileChange;
        let fc = |p: &str, t| FileChange {
            path: p.into(),
            old_path: None,
            change_type: t,
            binary: false,
            lines_added: 1,
            lines_deleted: 0,
            hunks: vec![],
        };
        let mut c = commit("w", "ann", 5, 1);
        let created: HashMap<String, i64> = [("x".to_string(), 1), ("y".to_string(), 5)].into();

        c.changes = vec![fc("x", ChangeType::Added), fc("y", ChangeType::Added)];
        assert_eq!(
            introduction_phase(Some(&c), &created),
            IntroductionPhase::Creation
        );
        c.changes = vec![fc("x", ChangeType::Modified)];
        assert_eq!(
            introduction_phase(Some(&c), &created),
            IntroductionPhase::Maintenance
        );
        c.changes = vec![fc("x", ChangeType::Added), fc("y", ChangeType::Modified)];
        assert_eq!(
            introduction_phase(Some(&c), &created),
            IntroductionPhase::Both
        );
        c.changes = vec![fc("z", ChangeType::Modified)];
        assert_eq!(
            introduction_phase(Some(&c), &created),
            IntroductionPhase::Unknown
        );
        assert_eq!(
            introduction_phase(None, &created),
            IntroductionPhase::Unknown
        );
    }
}
