//! Thin wrappers around the `git` executable plus parsers for its log, diff
//! and blame output.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;

use crate::error::{Error, Result};
use crate::ingest::{canonical_author, ChangeType, CommitRecord, FileChange, Hunk};

const RECORD_SEP: char = '\u{1e}';
const FIELD_SEP: char = '\u{1f}';

fn git(repo: &Path) -> Command {
    let mut cmd = Command::new("git");
    cmd.arg("-C")
        .arg(repo)
        .args(["-c", "core.quotepath=off", "-c", "diff.renames=true"])
        .env("LC_ALL", "C")
        .env("GIT_TERMINAL_PROMPT", "0");
    cmd
}

/// Runs git in `repo` and returns stdout, lossily decoded.
pub fn run(repo: &Path, args: &[&str]) -> Result<String> {
    let output = git(repo)
        .args(args)
        .output()
        .map_err(|e| Error::Git(format!("spawn git: {e}")))?;
    if !output.status.success() {
        return Err(Error::Git(format!(
            "git {} (in {}): {}",
            args.join(" "),
            repo.display(),
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&output.stdout).into_owned())
}

pub fn is_repository(path: &Path) -> bool {
    path.is_dir() && run(path, &["rev-parse", "--git-dir"]).is_ok()
}

pub fn clone(url: &str, dest: &Path) -> Result<()> {
    let output = Command::new("git")
        .args(["clone", "--quiet", "--no-single-branch", url])
        .arg(dest)
        .env("GIT_TERMINAL_PROMPT", "0")
        .output()
        .map_err(|e| Error::Git(format!("spawn git: {e}")))?;
    if !output.status.success() {
        return Err(Error::Git(format!(
            "clone {url}: {}",
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    Ok(())
}

/// Number of commits reachable from any ref.
pub fn commit_count(repo: &Path) -> Result<u64> {
    let out = run(repo, &["rev-list", "--all", "--count"])?;
    out.trim()
        .parse()
        .map_err(|_| Error::Git(format!("unexpected rev-list output {out:?}")))
}

/// Total blob size of the HEAD tree and the dominant language by extension.
pub fn head_tree_profile(repo: &Path) -> Result<(u64, String)> {
    let out = run(repo, &["ls-tree", "-r", "-l", "HEAD"])?;
    let mut total = 0u64;
    let mut by_lang: HashMap<&'static str, u64> = HashMap::new();
    for line in out.lines() {
        let Some((meta, path)) = line.split_once('\t') else {
            continue;
        };
        let size = meta
            .split_whitespace()
            .nth(3)
            .and_then(|s| s.parse::<u64>().ok())
            .unwrap_or(0);
        total += size;
        if let Some(lang) = language_of(path) {
            *by_lang.entry(lang).or_default() += size;
        }
    }
    let language = by_lang
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .map(|(l, _)| l.to_string())
        .unwrap_or_else(|| "unknown".to_string());
    Ok((total, language))
}

fn language_of(path: &str) -> Option<&'static str> {
    let ext = path.rsplit_once('.')?.1.to_ascii_lowercase();
    Some(match ext.as_str() {
        "cs" => "C#",
        "cpp" | "cc" | "cxx" | "hpp" | "hh" => "C++",
        "c" | "h" => "C",
        "js" | "jsx" | "mjs" => "JavaScript",
        "ts" | "tsx" => "TypeScript",
        "py" => "Python",
        "java" => "Java",
        "rs" => "Rust",
        "go" => "Go",
        "shader" | "hlsl" | "glsl" | "cginc" => "ShaderLab",
        "gd" => "GDScript",
        "swift" => "Swift",
        "kt" => "Kotlin",
        _ => return None,
    })
}

/// Reads every commit reachable from any ref, with per-file changes against
/// the first parent. Merge commits carry no changes.
pub fn log_all(repo: &Path) -> Result<Vec<CommitRecord>> {
    let format = "--format=%x1e%H%x1f%P%x1f%an%x1f%ae%x1f%at%x1f%B%x1f";
    let out = run(
        repo,
        &[
            "log",
            "--all",
            "--no-color",
            "--no-ext-diff",
            "--no-textconv",
            "-M",
            "-p",
            "-U0",
            format,
        ],
    )?;
    let mut commits = Vec::new();
    for chunk in out.split(RECORD_SEP).filter(|c| !c.trim().is_empty()) {
        let mut fields = chunk.splitn(7, FIELD_SEP);
        let mut next = || fields.next().unwrap_or("");
        let hash = next().trim().to_string();
        let parents = next()
            .split_whitespace()
            .map(str::to_string)
            .collect::<Vec<_>>();
        let name = next().to_string();
        let email = next().to_string();
        let authored_at = next()
            .trim()
            .parse::<i64>()
            .map_err(|_| Error::Git(format!("bad author time for {hash}")))?;
        let message = next().trim_end_matches('\n').to_string();
        let diff = next();
        commits.push(CommitRecord {
            hash,
            author_id: canonical_author(&name, &email),
            authored_at,
            message,
            parents,
            changes: parse_unified_diff(diff),
        });
    }
    Ok(commits)
}

/// `git diff -U0` between two revisions.
pub fn diff(repo: &Path, from: &str, to: &str) -> Result<Vec<FileChange>> {
    let out = run(
        repo,
        &[
            "diff",
            "--no-color",
            "--no-ext-diff",
            "--no-textconv",
            "-M",
            "-U0",
            from,
            to,
        ],
    )?;
    Ok(parse_unified_diff(&out))
}

/// Undoes git's C-style quoting of unusual path names.
fn unquote(s: &str) -> String {
    let s = s.trim_end_matches(['\r', '\n']);
    if !(s.len() >= 2 && s.starts_with('"') && s.ends_with('"')) {
        return s.to_string();
    }
    let inner = &s[1..s.len() - 1];
    let mut bytes = Vec::with_capacity(inner.len());
    let mut it = inner.bytes().peekable();
    while let Some(b) = it.next() {
        if b != b'\\' {
            bytes.push(b);
            continue;
        }
        match it.next() {
            Some(b'n') => bytes.push(b'\n'),
            Some(b't') => bytes.push(b'\t'),
            Some(b'"') => bytes.push(b'"'),
            Some(b'\\') => bytes.push(b'\\'),
            Some(d @ b'0'..=b'7') => {
                let mut v = (d - b'0') as u32;
                for _ in 0..2 {
                    match it.peek() {
                        Some(&n @ b'0'..=b'7') => {
                            v = v * 8 + (n - b'0') as u32;
                            it.next();
                        }
                        _ => break,
                    }
                }
                bytes.push(v as u8);
            }
            Some(other) => bytes.push(other),
            None => bytes.push(b'\\'),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

fn strip_side(path: &str) -> Option<String> {
    let p = unquote(path);
    if p == "/dev/null" {
        return None;
    }
    Some(
        p.strip_prefix("a/")
            .or_else(|| p.strip_prefix("b/"))
            .unwrap_or(&p)
            .to_string(),
    )
}

fn parse_range(s: &str) -> (u32, u32) {
    let s = &s[1..];
    match s.split_once(',') {
        Some((start, len)) => (start.parse().unwrap_or(0), len.parse().unwrap_or(0)),
        None => (s.parse().unwrap_or(0), 1),
    }
}

#[derive(Default)]
struct PendingFile {
    old_path: Option<String>,
    new_path: Option<String>,
    header_guess: Option<String>,
    new_file: bool,
    deleted_file: bool,
    renamed: bool,
    binary: bool,
    hunks: Vec<Hunk>,
}

impl PendingFile {
    fn finish(self) -> FileChange {
        let change_type = if self.new_file {
            ChangeType::Added
        } else if self.deleted_file {
            ChangeType::Deleted
        } else if self.renamed {
            ChangeType::Renamed
        } else {
            ChangeType::Modified
        };
        let path = match change_type {
            ChangeType::Deleted => self.old_path.clone(),
            _ => self.new_path.clone().or_else(|| self.old_path.clone()),
        }
        .or(self.header_guess)
        .unwrap_or_default();
        let old_path = match change_type {
            ChangeType::Renamed => self.old_path,
            _ => None,
        };
        let lines_added = self
            .hunks
            .iter()
            .map(|h| h.added_line_texts.len() as u64)
            .sum();
        let lines_deleted = self
            .hunks
            .iter()
            .map(|h| h.deleted_line_texts.len() as u64)
            .sum();
        FileChange {
            path,
            old_path,
            change_type,
            binary: self.binary,
            lines_added,
            lines_deleted,
            hunks: self.hunks,
        }
    }
}

/// Parses `git diff`/`git log -p` output produced with `-U0`.
///
/// Hunk bodies are consumed by the line counts in their `@@` header, so
/// removed lines that happen to look like `--- a/...` are not mistaken for
/// file headers.
pub fn parse_unified_diff(text: &str) -> Vec<FileChange> {
    let mut files = Vec::new();
    let mut current: Option<PendingFile> = None;
    let mut lines = text.split('\n').peekable();

    while let Some(line) = lines.next() {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            if let Some(done) = current.take() {
                files.push(done.finish());
            }
            // Only reliable when both sides agree, which holds for mode-only
            // and binary changes without renames.
            let guess = {
                let half = rest.len().saturating_sub(1) / 2;
                let (a, b) = (
                    &rest[..half.min(rest.len())],
                    rest.get(half + 1..).unwrap_or(""),
                );
                match (strip_side(a), strip_side(b)) {
                    (Some(a), Some(b)) if a == b => Some(a),
                    _ => None,
                }
            };
            current = Some(PendingFile {
                header_guess: guess,
                ..Default::default()
            });
            continue;
        }
        let Some(file) = current.as_mut() else {
            continue;
        };
        if line.starts_with("new file mode") {
            file.new_file = true;
        } else if line.starts_with("deleted file mode") {
            file.deleted_file = true;
        } else if let Some(p) = line.strip_prefix("rename from ") {
            file.renamed = true;
            file.old_path = Some(unquote(p));
        } else if let Some(p) = line.strip_prefix("rename to ") {
            file.renamed = true;
            file.new_path = Some(unquote(p));
        } else if let Some(p) = line.strip_prefix("--- ") {
            if let Some(p) = strip_side(p) {
                file.old_path = Some(p);
            }
        } else if let Some(p) = line.strip_prefix("+++ ") {
            if let Some(p) = strip_side(p) {
                file.new_path = Some(p);
            }
        } else if let Some(rest) = line.strip_prefix("Binary files ") {
            file.binary = true;
            if let Some((a, b)) = rest.trim_end_matches(" differ").split_once(" and ") {
                if let Some(a) = strip_side(a) {
                    file.old_path.get_or_insert(a);
                }
                if let Some(b) = strip_side(b) {
                    file.new_path.get_or_insert(b);
                }
            }
        } else if line.starts_with("GIT binary patch") {
            file.binary = true;
        } else if let Some(rest) = line.strip_prefix("@@ ") {
            let mut parts = rest.split_whitespace();
            let (old_start, old_len) = parts.next().map(parse_range).unwrap_or((0, 0));
            let (new_start, new_len) = parts.next().map(parse_range).unwrap_or((0, 0));
            let mut hunk = Hunk {
                old_start,
                old_len,
                new_start,
                new_len,
                deleted_line_texts: Vec::with_capacity(old_len as usize),
                added_line_texts: Vec::with_capacity(new_len as usize),
            };
            let (mut old_left, mut new_left) = (old_len, new_len);
            while old_left > 0 || new_left > 0 {
                let Some(body) = lines.peek() else { break };
                if let Some(t) = body.strip_prefix('-').filter(|_| old_left > 0) {
                    hunk.deleted_line_texts.push(t.to_string());
                    old_left -= 1;
                } else if let Some(t) = body.strip_prefix('+').filter(|_| new_left > 0) {
                    hunk.added_line_texts.push(t.to_string());
                    new_left -= 1;
                } else if body.starts_with(' ') {
                    // Context only appears when -U0 was not honoured.
                    old_left = old_left.saturating_sub(1);
                    new_left = new_left.saturating_sub(1);
                } else if !body.starts_with('\\') {
                    break;
                }
                lines.next();
            }
            file.hunks.push(hunk);
        }
    }
    if let Some(done) = current.take() {
        files.push(done.finish());
    }
    files
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlamedLine {
    pub line: u32,
    pub commit: String,
    pub author_time: i64,
}

/// Blames the given 1-based inclusive line ranges of `path` at `rev`.
pub fn blame(repo: &Path, rev: &str, path: &str, ranges: &[(u32, u32)]) -> Result<Vec<BlamedLine>> {
    if ranges.is_empty() {
        return Ok(Vec::new());
    }
    let mut args: Vec<String> = vec!["blame".into(), "--porcelain".into()];
    for (start, end) in ranges {
        args.push("-L".into());
        args.push(format!("{start},{end}"));
    }
    args.push(rev.to_string());
    args.push("--".into());
    args.push(path.to_string());
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run(repo, &refs)?;
    Ok(parse_blame_porcelain(&out))
}

pub fn parse_blame_porcelain(text: &str) -> Vec<BlamedLine> {
    let mut times: HashMap<String, i64> = HashMap::new();
    let mut pending: Vec<(u32, String)> = Vec::new();
    let mut current: Option<(String, u32)> = None;
    for line in text.lines() {
        if line.starts_with('\t') {
            if let Some((commit, final_line)) = current.take() {
                pending.push((final_line, commit));
            }
            continue;
        }
        let mut parts = line.split(' ');
        let head = parts.next().unwrap_or("");
        if head.len() == 40 && head.bytes().all(|b| b.is_ascii_hexdigit()) {
            let final_line = parts.nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
            current = Some((head.to_string(), final_line));
        } else if head == "author-time" {
            if let (Some((commit, _)), Some(t)) = (&current, parts.next()) {
                if let Ok(t) = t.parse() {
                    times.insert(commit.clone(), t);
                }
            }
        }
    }
    pending
        .into_iter()
        .map(|(line, commit)| BlamedLine {
            line,
            author_time: times.get(&commit).copied().unwrap_or(0),
            commit,
        })
        .collect()
}
