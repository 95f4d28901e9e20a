//! SZZ-style tracing of weakness-contributing commits.
//!
//! For a fixing commit, every non-blank line it removes (relative to its first
//! parent) is blamed at the parent revision. The commits that last touched
//! those lines, restricted to ones authored strictly before the fix, form the
//! contributing set. Attribution is one level deep.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::git;
use crate::ingest::{ChangeType, CommitRecord, FileChange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UntraceableReason {
    PureAddition,
    BinaryOnly,
    AttributionFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Wcc {
    pub hash: String,
    pub authored_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileFailure {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WccChain {
    pub project: String,
    pub wfc_hash: String,
    pub wfc_authored_at: i64,
    /// Sorted by `authored_at`, then hash.
    pub wccs: Vec<Wcc>,
    pub traced: bool,
    pub untraceable_reason: Option<UntraceableReason>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FileFailure>,
}

impl WccChain {
    pub fn earliest(&self) -> Option<&Wcc> {
        self.wccs.first()
    }

    pub fn latest(&self) -> Option<&Wcc> {
        self.wccs.last()
    }

    pub fn contains(&self, hash: &str) -> bool {
        self.wccs.iter().any(|w| w.hash == hash)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SzzConfig {
    /// Path suffixes never traced (matched case-insensitively).
    pub ignore_suffixes: Vec<String>,
}

impl Default for SzzConfig {
    fn default() -> Self {
        SzzConfig {
            ignore_suffixes: [
                ".meta",
                ".asset",
                ".prefab",
                ".unity",
                ".mat",
                ".anim",
                ".controller",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

impl SzzConfig {
    pub fn is_ignored(&self, path: &str) -> bool {
        let lower = path.to_ascii_lowercase();
        self.ignore_suffixes
            .iter()
            .any(|s| lower.ends_with(&s.to_ascii_lowercase()))
    }
}

/// Old-side line numbers of the non-blank lines a change removes, as
/// inclusive ranges of consecutive lines.
pub fn removed_line_ranges(change: &FileChange) -> Vec<(u32, u32)> {
    let mut lines: Vec<u32> = Vec::new();
    for h in &change.hunks {
        for (i, text) in h.deleted_line_texts.iter().enumerate() {
            if !text.trim().is_empty() {
                lines.push(h.old_start + i as u32);
            }
        }
    }
    lines.sort_unstable();
    lines.dedup();
    let mut ranges: Vec<(u32, u32)> = Vec::new();
    for l in lines {
        match ranges.last_mut() {
            Some((_, end)) if *end + 1 == l => *end = l,
            _ => ranges.push((l, l)),
        }
    }
    ranges
}

pub fn trace(project: &str, wfc: &CommitRecord, repo: &Path, cfg: &SzzConfig) -> WccChain {
    let mut chain = WccChain {
        project: project.to_string(),
        wfc_hash: wfc.hash.clone(),
        wfc_authored_at: wfc.authored_at,
        wccs: Vec::new(),
        traced: false,
        untraceable_reason: None,
        failures: Vec::new(),
    };

    let Some(parent) = wfc.parents.first() else {
        chain.untraceable_reason = Some(UntraceableReason::PureAddition);
        return chain;
    };
    let merge_diff;
    let changes: &[FileChange] = if wfc.is_merge() {
        match git::diff(repo, parent, &wfc.hash) {
            Ok(c) => {
                merge_diff = c;
                &merge_diff
            }
            Err(e) => {
                chain.failures.push(FileFailure {
                    path: String::new(),
                    error: e.to_string(),
                });
                chain.untraceable_reason = Some(UntraceableReason::AttributionFailed);
                return chain;
            }
        }
    } else {
        &wfc.changes
    };

    let mut found: BTreeMap<String, i64> = BTreeMap::new();
    let mut blamed_any = false;
    let mut saw_binary = false;
    for change in changes {
        if change.change_type == ChangeType::Added || cfg.is_ignored(change.parent_path()) {
            continue;
        }
        if change.binary {
            saw_binary = true;
            continue;
        }
        let ranges = removed_line_ranges(change);
        if ranges.is_empty() {
            continue;
        }
        match git::blame(repo, parent, change.parent_path(), &ranges) {
            Ok(lines) => {
                blamed_any |= !lines.is_empty();
                for l in lines {
                    if l.commit != wfc.hash && l.author_time < wfc.authored_at {
                        found.insert(l.commit, l.author_time);
                    }
                }
            }
            Err(e) => chain.failures.push(FileFailure {
                path: change.parent_path().to_string(),
                error: e.to_string(),
            }),
        }
    }

    chain.wccs = found
        .into_iter()
        .map(|(hash, authored_at)| Wcc { hash, authored_at })
        .collect();
    chain.wccs.sort_by(|a, b| {
        a.authored_at
            .cmp(&b.authored_at)
            .then_with(|| a.hash.cmp(&b.hash))
    });
    chain.traced = !chain.wccs.is_empty();
    if !chain.traced {
        chain.untraceable_reason = Some(if !chain.failures.is_empty() || blamed_any {
            UntraceableReason::AttributionFailed
        } else if saw_binary {
            UntraceableReason::BinaryOnly
        } else {
            UntraceableReason::PureAddition
        });
    }
    chain
}

/// Traces many fixes with `workers` threads. Output order matches input order
/// regardless of scheduling.
pub fn trace_all(
    wfcs: &[(String, CommitRecord)],
    repo_for: &(dyn Fn(&str) -> Option<std::path::PathBuf> + Sync),
    workers: usize,
    cfg: &SzzConfig,
) -> Result<Vec<WccChain>> {
    if workers < 1 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(|| {
        wfcs.par_iter()
            .map(|(project, wfc)| match repo_for(project) {
                Some(repo) => trace(project, wfc, &repo, cfg),
                None => WccChain {
                    project: project.clone(),
                    wfc_hash: wfc.hash.clone(),
                    wfc_authored_at: wfc.authored_at,
                    wccs: Vec::new(),
                    traced: false,
                    untraceable_reason: Some(UntraceableReason::AttributionFailed),
                    failures: vec![FileFailure {
                        path: String::new(),
                        error: format!("no repository for project {project}"),
                    }],
                },
            })
            .collect()
    }))
}
