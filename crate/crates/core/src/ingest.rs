//! Project selection and commit-history extraction.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::git;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const DAYS_PER_MONTH: f64 = 30.44;
/// Floor applied to the active duration before dividing, so that projects
/// whose history spans a single day still get a finite commit frequency.
pub const MIN_ACTIVE_DAYS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectCategory {
    Game,
    Module,
    Utility,
    Sdk,
    Plugin,
    Tutorial,
    DevFramework,
    Driver,
    GraphicsEngine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectClass {
    Application,
    DevelopmentTool,
}

impl ProjectCategory {
    pub const ALL: [ProjectCategory; 9] = [
        ProjectCategory::Game,
        ProjectCategory::Module,
        ProjectCategory::Utility,
        ProjectCategory::Sdk,
        ProjectCategory::Plugin,
        ProjectCategory::Tutorial,
        ProjectCategory::DevFramework,
        ProjectCategory::Driver,
        ProjectCategory::GraphicsEngine,
    ];

    pub fn class(self) -> ProjectClass {
        match self {
            ProjectCategory::Game | ProjectCategory::Module | ProjectCategory::Utility => {
                ProjectClass::Application
            }
            _ => ProjectClass::DevelopmentTool,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProjectCategory::Game => "game",
            ProjectCategory::Module => "module",
            ProjectCategory::Utility => "utility",
            ProjectCategory::Sdk => "sdk",
            ProjectCategory::Plugin => "plugin",
            ProjectCategory::Tutorial => "tutorial",
            ProjectCategory::DevFramework => "dev_framework",
            ProjectCategory::Driver => "driver",
            ProjectCategory::GraphicsEngine => "graphics_engine",
        }
    }
}

impl std::str::FromStr for ProjectCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProjectCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown project category {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectRecord {
    pub id: String,
    pub clone_url: String,
    pub local_path: PathBuf,
    /// Unset when the manifest does not categorize the project.
    pub category: Option<ProjectCategory>,
    pub class: Option<ProjectClass>,
    pub primary_language: String,
    pub size_bytes: u64,
    pub author_count: u32,
}

impl ProjectRecord {
    pub fn new(id: impl Into<String>, clone_url: impl Into<String>, local_path: PathBuf) -> Self {
        ProjectRecord {
            id: id.into(),
            clone_url: clone_url.into(),
            local_path,
            category: None,
            class: None,
            primary_language: "unknown".into(),
            size_bytes: 0,
            author_count: 0,
        }
    }

    pub fn with_category(mut self, category: Option<ProjectCategory>) -> Self {
        self.category = category;
        self.class = category.map(ProjectCategory::class);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeType {
    Added,
    Modified,
    Deleted,
    Renamed,
}

impl ChangeType {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeType::Added => "added",
            ChangeType::Modified => "modified",
            ChangeType::Deleted => "deleted",
            ChangeType::Renamed => "renamed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    pub deleted_line_texts: Vec<String>,
    #[serde(default)]
    pub added_line_texts: Vec<String>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    /// Source path of a rename.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_path: Option<String>,
    pub change_type: ChangeType,
    #[serde(default, skip_serializing_if = "is_false")]
    pub binary: bool,
    pub lines_added: u64,
    pub lines_deleted: u64,
    pub hunks: Vec<Hunk>,
}

impl FileChange {
    /// Path of the file on the parent side of the diff.
    pub fn parent_path(&self) -> &str {
        self.old_path.as_deref().unwrap_or(&self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub hash: String,
    pub author_id: String,
    /// Seconds since the Unix epoch, UTC.
    pub authored_at: i64,
    pub message: String,
    pub parents: Vec<String>,
    pub changes: Vec<FileChange>,
}

impl CommitRecord {
    pub fn is_merge(&self) -> bool {
        self.parents.len() > 1
    }

    pub fn lines_changed(&self) -> u64 {
        self.changes
            .iter()
            .map(|c| c.lines_added + c.lines_deleted)
            .sum()
    }
}

pub fn is_valid_hash(hash: &str) -> bool {
    hash.len() == 40 && hash.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Author key: lowercased email, or lowercased name when the email is blank.
pub fn canonical_author(name: &str, email: &str) -> String {
    let email = email.trim();
    if email.is_empty() {
        name.trim().to_lowercase()
    } else {
        email.to_lowercase()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectStats {
    pub d_act_days: u64,
    pub d_act_months: f64,
    pub n_com: u64,
    pub f_com: f64,
}

pub fn compute_project_stats(commits: &[CommitRecord]) -> Result<ProjectStats> {
    let first = commits
        .iter()
        .map(|c| c.authored_at)
        .min()
        .ok_or(Error::EmptyHistory)?;
    let last = commits
        .iter()
        .map(|c| c.authored_at)
        .max()
        .ok_or(Error::EmptyHistory)?;
    let span_days = (last - first) as f64 / SECONDS_PER_DAY;
    let d_act_months = span_days / DAYS_PER_MONTH;
    let n_com = commits.len() as u64;
    let floor_months = MIN_ACTIVE_DAYS / DAYS_PER_MONTH;
    Ok(ProjectStats {
        d_act_days: ((last - first) / 86_400) as u64,
        d_act_months,
        n_com,
        f_com: n_com as f64 / d_act_months.max(floor_months),
    })
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub project: ProjectRecord,
    pub commit_count: u64,
    pub accessible: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Selection {
    pub projects: Vec<ProjectRecord>,
    pub excluded_inaccessible: usize,
    pub excluded_too_few_commits: usize,
}

/// Keeps accessible candidates with at least `min_commits` commits, in order.
pub fn select_projects(candidates: Vec<Candidate>, min_commits: u64) -> Result<Selection> {
    if min_commits < 1 {
        return Err(Error::InvalidArgument(
            "min_commits must be at least 1".into(),
        ));
    }
    let mut selection = Selection::default();
    for c in candidates {
        if !c.accessible {
            selection.excluded_inaccessible += 1;
        } else if c.commit_count < min_commits {
            selection.excluded_too_few_commits += 1;
        } else {
            selection.projects.push(c.project);
        }
    }
    if selection.excluded_inaccessible > 0 {
        log::info!(
            "skipped {} inaccessible project(s)",
            selection.excluded_inaccessible
        );
    }
    Ok(selection)
}

/// Extracts every commit reachable from any ref, oldest first.
pub fn extract_commits(project: &ProjectRecord) -> Result<Vec<CommitRecord>> {
    let path = &project.local_path;
    let unreadable = |reason: String| Error::RepositoryUnreadable {
        path: path.clone(),
        reason,
    };
    if !git::is_repository(path) {
        return Err(unreadable("not a git repository".into()));
    }
    let mut commits = git::log_all(path).map_err(|e| unreadable(e.to_string()))?;
    if commits.is_empty() {
        return Err(unreadable("repository has no commits".into()));
    }
    commits.sort_by(|a, b| {
        a.authored_at
            .cmp(&b.authored_at)
            .then_with(|| a.hash.cmp(&b.hash))
    });
    Ok(commits)
}

/// Fills size, language and author count from the repository and its history.
pub fn describe_project(project: &mut ProjectRecord, commits: &[CommitRecord]) -> Result<()> {
    let (size, language) = git::head_tree_profile(&project.local_path)?;
    project.size_bytes = size;
    project.primary_language = language;
    project.author_count = commits
        .iter()
        .map(|c| c.author_id.as_str())
        .collect::<BTreeSet<_>>()
        .len() as u32;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub url: String,
    pub id: Option<String>,
    pub category: Option<ProjectCategory>,
}

/// Parses a manifest: one clone URL per line, `#` starts a comment, and
/// optional `key=value` pairs (`id`, `category`) may follow the URL.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) if pos == 0 || raw[..pos].ends_with(char::is_whitespace) => &raw[..pos],
            _ => raw,
        };
        let mut parts = line.split_whitespace();
        let Some(url) = parts.next() else { continue };
        let mut entry = ManifestEntry {
            url: url.to_string(),
            id: None,
            category: None,
        };
        for kv in parts {
            match kv.split_once('=') {
                Some(("category", v)) => entry.category = Some(v.parse()?),
                Some(("id", v)) => entry.id = Some(v.to_string()),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "manifest line {}: unexpected token {kv:?}",
                        idx + 1
                    )))
                }
            }
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Derives a project id from a clone URL or path (`.../owner/name.git` → `name`).
pub fn project_id_from_url(url: &str) -> String {
    let trimmed = url.trim_end_matches('/');
    let last = trimmed.rsplit(['/', ':', '\\']).next().unwrap_or(trimmed);
    let name = last.strip_suffix(".git").unwrap_or(last);
    let cleaned: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() {
        "project".into()
    } else {
        cleaned
    }
}

/// Assigns ids to manifest entries, disambiguating collisions with a suffix.
pub fn assign_ids(entries: &[ManifestEntry]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    entries
        .iter()
        .map(|e| {
            let base = e.id.clone().unwrap_or_else(|| project_id_from_url(&e.url));
            let mut id = base.clone();
            let mut n = 2;
            while !seen.insert(id.clone()) {
                id = format!("{base}-{n}");
                n += 1;
            }
            id
        })
        .collect()
}

pub fn history_path(dir: &Path, project_id: &str) -> PathBuf {
    dir.join("history").join(format!("{project_id}.jsonl"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commit_at(t: i64) -> CommitRecord {
        CommitRecord {
            hash: format!("{:040x}", t),
            author_id: "a".into(),
            authored_at: t,
            message: String::new(),
            parents: vec![],
            changes: vec![],
        }
    }

    fn candidate(url: &str, count: u64, accessible: bool) -> Candidate {
        Candidate {
            project: ProjectRecord::new(project_id_from_url(url), url, PathBuf::from(url)),
            commit_count: count,
            accessible,
        }
    }

    #[test]
    fn selection_threshold_boundary() {
        let sel = select_projects(
            vec![
                candidate("u/a", 99, true),
                candidate("u/b", 100, true),
                candidate("u/c", 5000, false),
            ],
            100,
        )
        .unwrap();
        let ids: Vec<_> = sel.projects.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["b"]);
        assert_eq!(sel.excluded_inaccessible, 1);
        assert_eq!(sel.excluded_too_few_commits, 1);
        assert!(select_projects(vec![], 0).is_err());
    }

    #[test]
    fn category_class_mapping() {
        use ProjectCategory::*;
        for c in [Game, Module, Utility] {
            assert_eq!(c.class(), ProjectClass::Application);
        }
        for c in [Sdk, Plugin, Tutorial, DevFramework, Driver, GraphicsEngine] {
            assert_eq!(c.class(), ProjectClass::DevelopmentTool);
        }
        assert_eq!(
            "graphics_engine".parse::<ProjectCategory>().unwrap(),
            GraphicsEngine
        );
    }

    #[test]
    fn stats_long_running_project() {
        let day = 86_400;
        let mut commits: Vec<_> = (0..1386).map(|i| commit_at(i * 2 * day)).collect();
        commits.push(commit_at(3332 * day));
        let s = compute_project_stats(&commits).unwrap();
        assert_eq!(s.n_com, 1387);
        assert_eq!(s.d_act_days, 3332);
        // 1387 / (3332 / 30.44)
        assert!(
            (s.f_com - 1387.0 * 30.44 / 3332.0).abs() < 1e-9,
            "{}",
            s.f_com
        );
    }

    #[test]
    fn stats_exact_months_and_single_day_floor() {
        let ten_months = (10.0 * DAYS_PER_MONTH * SECONDS_PER_DAY) as i64;
        let mut commits: Vec<_> = (0..99).map(|i| commit_at(i * 1000)).collect();
        commits.push(commit_at(ten_months));
        let s = compute_project_stats(&commits).unwrap();
        assert!((s.f_com - 10.0).abs() < 1e-9);

        let same_day: Vec<_> = (0..179).map(|i| commit_at(1_000_000 + i)).collect();
        let s = compute_project_stats(&same_day).unwrap();
        assert_eq!(s.d_act_days, 0);
        assert!((s.f_com - 179.0 * DAYS_PER_MONTH).abs() < 1e-9);

        assert!(matches!(
            compute_project_stats(&[]),
            Err(Error::EmptyHistory)
        ));
    }

    #[test]
    fn manifest_parsing() {
        let text = "# header\nhttps://github.com/o/vrs.git category=utility\n\n/tmp/repos/x  # local\nhttps://h/o/vrs\n";
        let entries = parse_manifest(text).unwrap();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[0].category, Some(ProjectCategory::Utility));
        assert_eq!(entries[1].url, "/tmp/repos/x");
        assert_eq!(assign_ids(&entries), vec!["vrs", "x", "vrs-2"]);
        assert!(parse_manifest("u bogus").is_err());
    }

    #[test]
    fn author_canonicalization() {
        assert_eq!(
            canonical_author("Ann", " Ann@Example.COM "),
            "ann@example.com"
        );
        assert_eq!(canonical_author("  Ann Lee ", ""), "ann lee");
    }
}
