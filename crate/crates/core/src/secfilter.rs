//! Security-commit identification: a keyword filter over commit messages,
//! optionally combined with an external code-level classifier.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::sync::Mutex;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::ingest::{ChangeType, CommitRecord, FileChange};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub commit_hash: String,
    pub keyword_match: bool,
    pub matched_terms: Vec<String>,
    pub exclusion_hits: Vec<String>,
    pub classifier_score: Option<f64>,
    pub is_security: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordLexicon {
    pub remedial_terms: Vec<String>,
    pub weakness_terms: Vec<String>,
    pub type_terms: Vec<String>,
    pub exclusion_terms: Vec<String>,
}

fn owned(terms: &[&str]) -> Vec<String> {
    terms.iter().map(|s| s.to_string()).collect()
}

impl Default for KeywordLexicon {
    fn default() -> Self {
        KeywordLexicon {
            remedial_terms: owned(&["fix", "patch", "resolve"]),
            weakness_terms: owned(&["vulnerability", "bug", "weakness", "exposure", "threat"]),
            type_terms: owned(&["sql injection", "xss"]),
            exclusion_terms: owned(&["merge", "test", "configuration"]),
        }
    }
}

impl KeywordLexicon {
    pub fn inclusion_terms(&self) -> impl Iterator<Item = &String> {
        self.remedial_terms
            .iter()
            .chain(&self.weakness_terms)
            .chain(&self.type_terms)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.inclusion_terms().chain(&self.exclusion_terms);
        for term in all {
            if term.trim().is_empty() {
                return Err(Error::LexiconInvalid("empty term".into()));
            }
            if *term != term.to_lowercase() {
                return Err(Error::LexiconInvalid(format!(
                    "term {term:?} is not lowercase"
                )));
            }
        }
        if let Some(t) = self
            .inclusion_terms()
            .find(|t| self.exclusion_terms.contains(t))
        {
            return Err(Error::LexiconInvalid(format!(
                "term {t:?} is both included and excluded"
            )));
        }
        Ok(())
    }

    /// Parses the sectioned text format (`[remedial]`, `[weakness]`,
    /// `[types]`, `[exclude]`, one term per line, `#` comments).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = KeywordLexicon {
            remedial_terms: vec![],
            weakness_terms: vec![],
            type_terms: vec![],
            exclusion_terms: vec![],
        };
        let mut section: Option<&mut Vec<String>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = Some(match &line[1..line.len() - 1] {
                    "remedial" => &mut lex.remedial_terms,
                    "weakness" => &mut lex.weakness_terms,
                    "types" => &mut lex.type_terms,
                    "exclude" => &mut lex.exclusion_terms,
                    other => {
                        return Err(Error::LexiconInvalid(format!(
                            "line {}: unknown section [{other}]",
                            idx + 1
                        )))
                    }
                });
                continue;
            }
            match section.as_deref_mut() {
                Some(terms) => {
                    let term = line.to_string();
                    if !terms.contains(&term) {
                        terms.push(term);
                    }
                }
                None => {
                    return Err(Error::LexiconInvalid(format!(
                        "line {}: term outside of a section",
                        idx + 1
                    )))
                }
            }
        }
        lex.validate()?;
        Ok(lex)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, terms) in [
            ("remedial", &self.remedial_terms),
            ("weakness", &self.weakness_terms),
            ("types", &self.type_terms),
            ("exclude", &self.exclusion_terms),
        ] {
            let _ = writeln!(out, "[{name}]");
            for t in terms {
                let _ = writeln!(out, "{t}");
            }
        }
        out
    }
}

/// A single lexicon term compiled for matching.
#[derive(Debug, Clone)]
pub struct TermMatcher {
    term: String,
    word: Option<Regex>,
}

impl TermMatcher {
    pub fn new(term: &str) -> Self {
        let term = term.to_lowercase();
        // Single words match on word boundaries; phrases match as substrings.
        let word = if term.contains(char::is_whitespace) {
            None
        } else {
            Some(
                Regex::new(&format!(r"(?i)\b{}\b", regex::escape(&term)))
                    .expect("escaped term is a valid pattern"),
            )
        };
        TermMatcher { term, word }
    }

    pub fn term(&self) -> &str {
        &self.term
    }

    /// `lowered` must be the lowercase form of `text`.
    pub fn is_match(&self, text: &str, lowered: &str) -> bool {
        match &self.word {
            Some(re) => re.is_match(text),
            None => lowered.contains(&self.term),
        }
    }
}

pub fn match_terms<'a>(matchers: &'a [TermMatcher], text: &str) -> Vec<&'a str> {
    let lowered = text.to_lowercase();
    let mut hits: Vec<&str> = Vec::new();
    for m in matchers {
        if m.is_match(text, &lowered) && !hits.contains(&m.term()) {
            hits.push(m.term());
        }
    }
    hits
}

#[derive(Debug, Clone)]
pub struct KeywordFilter {
    inclusion: Vec<TermMatcher>,
    exclusion: Vec<TermMatcher>,
}

impl KeywordFilter {
    pub fn new(lexicon: &KeywordLexicon) -> Result<Self> {
        lexicon.validate()?;
        Ok(KeywordFilter {
            inclusion: lexicon
                .inclusion_terms()
                .map(|t| TermMatcher::new(t))
                .collect(),
            exclusion: lexicon
                .exclusion_terms
                .iter()
                .map(|t| TermMatcher::new(t))
                .collect(),
        })
    }
}

/// Keyword verdict for one message. Inclusion terms win over exclusion terms;
/// exclusion hits are still recorded.
pub fn keyword_filter(commit_hash: &str, message: &str, filter: &KeywordFilter) -> FilterVerdict {
    let matched: Vec<String> = match_terms(&filter.inclusion, message)
        .into_iter()
        .map(str::to_string)
        .collect();
    let exclusion_hits = match_terms(&filter.exclusion, message)
        .into_iter()
        .map(str::to_string)
        .collect();
    let keyword_match = !matched.is_empty();
    FilterVerdict {
        commit_hash: commit_hash.to_string(),
        keyword_match,
        matched_terms: matched,
        exclusion_hits,
        classifier_score: None,
        is_security: keyword_match,
    }
}

pub fn merge_verdicts(keyword: FilterVerdict, score: Option<f64>, threshold: f64) -> FilterVerdict {
    debug_assert!((0.0..=1.0).contains(&threshold));
    let classifier_says = score.is_some_and(|s| s >= threshold);
    FilterVerdict {
        is_security: keyword.keyword_match || classifier_says,
        classifier_score: score,
        ..keyword
    }
}

#[derive(Debug, Serialize)]
struct ClassifierRequest<'a> {
    hash: &'a str,
    message: &'a str,
    files: Vec<&'a str>,
    change_types: Vec<ChangeType>,
    diff: String,
}

/// Renders recorded hunks back into unified-diff text (zero context).
pub fn render_unified_diff(changes: &[FileChange]) -> String {
    let mut out = String::new();
    for c in changes {
        let old = c.parent_path();
        let _ = writeln!(out, "diff --git a/{old} b/{}", c.path);
        if c.binary {
            let _ = writeln!(out, "Binary files a/{old} and b/{} differ", c.path);
            continue;
        }
        let (from, to) = match c.change_type {
            ChangeType::Added => ("/dev/null".to_string(), format!("b/{}", c.path)),
            ChangeType::Deleted => (format!("a/{old}"), "/dev/null".to_string()),
            _ => (format!("a/{old}"), format!("b/{}", c.path)),
        };
        let _ = writeln!(out, "--- {from}\n+++ {to}");
        for h in &c.hunks {
            let _ = writeln!(
                out,
                "@@ -{},{} +{},{} @@",
                h.old_start, h.old_len, h.new_start, h.new_len
            );
            for l in &h.deleted_line_texts {
                let _ = writeln!(out, "-{l}");
            }
            for l in &h.added_line_texts {
                let _ = writeln!(out, "+{l}");
            }
        }
    }
    out
}

/// Invokes an external scoring command. The command reads one JSON request
/// per line on stdin and answers `<hash> <score>` per line on stdout.
#[derive(Debug)]
pub struct ExternalClassifier {
    command: String,
    cache: Mutex<HashMap<String, f64>>,
}

impl ExternalClassifier {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalClassifier {
            command: command.into(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn cached(&self, hash: &str) -> Option<f64> {
        self.cache.lock().unwrap().get(hash).copied()
    }

    pub fn invoke_external_classifier(&self, commit: &CommitRecord) -> Result<f64> {
        let scores = self.score_batch(&[commit])?;
        scores
            .get(&commit.hash)
            .copied()
            .ok_or_else(|| Error::ClassifierUnavailable(format!("no score for {}", commit.hash)))
    }

    /// Scores every commit not already cached in one invocation.
    pub fn score_batch(&self, commits: &[&CommitRecord]) -> Result<HashMap<String, f64>> {
        let missing: Vec<&CommitRecord> = {
            let cache = self.cache.lock().unwrap();
            commits
                .iter()
                .copied()
                .filter(|c| !cache.contains_key(&c.hash))
                .collect()
        };
        if !missing.is_empty() {
            let fresh = self.run(&missing)?;
            self.cache.lock().unwrap().extend(fresh);
        }
        let cache = self.cache.lock().unwrap();
        Ok(commits
            .iter()
            .filter_map(|c| cache.get(&c.hash).map(|s| (c.hash.clone(), *s)))
            .collect())
    }

    fn run(&self, commits: &[&CommitRecord]) -> Result<HashMap<String, f64>> {
        let unavailable = |msg: String| Error::ClassifierUnavailable(msg);
        let mut payload = String::new();
        for c in commits {
            let req = ClassifierRequest {
                hash: &c.hash,
                message: &c.message,
                files: c.changes.iter().map(|f| f.path.as_str()).collect(),
                change_types: c.changes.iter().map(|f| f.change_type).collect(),
                diff: render_unified_diff(&c.changes),
            };
            payload.push_str(&artifact::to_line(&req)?);
            payload.push('\n');
        }

        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| unavailable(format!("spawn {:?}: {e}", self.command)))?;
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = std::thread::spawn(move || {
            // A command that exits early closes the pipe; that surfaces below
            // through the exit status or missing scores.
            let _ = stdin.write_all(payload.as_bytes());
        });
        let stdout = child.stdout.take().expect("stdout is piped");
        let mut scores = HashMap::new();
        for line in BufReader::new(stdout).lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (hash, score) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| unavailable(format!("malformed response line {line:?}")))?;
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| unavailable(format!("malformed score in {line:?}")))?;
            if !(0.0..=1.0).contains(&score) {
                return Err(unavailable(format!("score {score} outside [0, 1]")));
            }
            scores.insert(hash.to_string(), score);
        }
        let _ = writer.join();
        let output = child.wait_with_output()?;
        if !output.status.success() {
            return Err(unavailable(format!(
                "{:?} exited with {}: {}",
                self.command,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        Ok(scores)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub verdicts: Vec<FilterVerdict>,
    /// Set when a classifier was configured but could not be used.
    pub degraded: bool,
    pub degraded_cause: Option<String>,
}

/// Filters a project's commits, merging in classifier scores when available.
pub fn filter_commits(
    commits: &[CommitRecord],
    filter: &KeywordFilter,
    classifier: Option<&ExternalClassifier>,
    threshold: f64,
) -> FilterOutcome {
    let keyword: Vec<FilterVerdict> = commits
        .par_iter()
        .map(|c| keyword_filter(&c.hash, &c.message, filter))
        .collect();
    let (scores, degraded_cause) = match classifier {
        None => (HashMap::new(), None),
        Some(cls) => {
            let refs: Vec<&CommitRecord> = commits.iter().collect();
            match cls.score_batch(&refs) {
                Ok(s) => (s, None),
                Err(e) => {
                    log::warn!("classifier unavailable, continuing keyword-only: {e}");
                    (HashMap::new(), Some(e.to_string()))
                }
            }
        }
    };
    let verdicts = keyword
        .into_iter()
        .map(|v| {
            let score = scores.get(&v.commit_hash).copied();
            merge_verdicts(v, score, threshold)
        })
        .collect();
    FilterOutcome {
        verdicts,
        degraded: degraded_cause.is_some(),
        degraded_cause,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filter() -> KeywordFilter {
        KeywordFilter::new(&KeywordLexicon::default()).unwrap()
    }

    #[test]
    fn keyword_examples() {
        let v = keyword_filter("h", "Fix null pointer crash", &filter());
        assert!(v.keyword_match && v.is_security);
        assert_eq!(v.matched_terms, vec!["fix"]);

        let v = keyword_filter("h", "Merge branch 'main'", &filter());
        assert!(!v.keyword_match);
        assert_eq!(v.exclusion_hits, vec!["merge"]);

        let v = keyword_filter("h", "", &filter());
        assert!(!v.keyword_match && v.matched_terms.is_empty());
    }

    #[test]
    fn inclusion_wins_and_records_exclusions() {
        let v = keyword_filter("h", "Merge: fix SQL Injection in login test", &filter());
        assert!(v.keyword_match);
        assert_eq!(v.matched_terms, vec!["fix", "sql injection"]);
        assert_eq!(v.exclusion_hits, vec!["merge", "test"]);
    }

    #[test]
    fn word_boundaries_for_single_terms() {
        let lex = KeywordLexicon {
            remedial_terms: owned(&["prefix"]),
            weakness_terms: vec![],
            type_terms: vec![],
            exclusion_terms: vec![],
        };
        let f = KeywordFilter::new(&lex).unwrap();
        assert!(!keyword_filter("h", "prefixed names", &f).keyword_match);
        assert!(keyword_filter("h", "a PREFIX, here", &f).keyword_match);
    }

    #[test]
    fn merge_truth_table() {
        let base = |m| FilterVerdict {
            commit_hash: "h".into(),
            keyword_match: m,
            matched_terms: if m { vec!["fix".into()] } else { vec![] },
            exclusion_hits: vec![],
            classifier_score: None,
            is_security: m,
        };
        assert!(merge_verdicts(base(false), Some(0.9), 0.5).is_security);
        assert!(merge_verdicts(base(true), None, 0.5).is_security);
        assert!(!merge_verdicts(base(false), None, 0.5).is_security);
        assert!(merge_verdicts(base(false), Some(0.5), 0.5).is_security);
        assert!(!merge_verdicts(base(false), Some(0.49), 0.5).is_security);
    }

    #[test]
    fn lexicon_file_parsing_and_validation() {
        let lex = KeywordLexicon::parse(
            "# lexicon\n[remedial]\nfix\n[weakness]\nbug\n[types]\nbuffer overflow\n[exclude]\ndocs\n",
        )
        .unwrap();
        assert_eq!(lex.type_terms, vec!["buffer overflow"]);
        assert_eq!(KeywordLexicon::parse(&lex.render()).unwrap(), lex);
        assert!(KeywordLexicon::parse("[remedial]\nFix\n").is_err());
        assert!(KeywordLexicon::parse("[remedial]\nfix\n[exclude]\nfix\n").is_err());
        assert!(KeywordLexicon::parse("fix\n").is_err());
        assert!(KeywordLexicon::parse("[other]\nfix\n").is_err());
    }

    #[test]
    fn renders_diff_from_hunks() {
        use crate::ingest::Hunk;
        let change = FileChange {
            path: "a.cs".into(),
            old_path: None,
            change_type: ChangeType::Modified,
            binary: false,
            lines_added: 1,
            lines_deleted: 1,
            hunks: vec![Hunk {
                old_start: 2,
                old_len: 1,
                new_start: 2,
                new_len: 1,
                deleted_line_texts: vec!["old".into()],
                added_line_texts: vec!["new".into()],
            }],
        };
        let text = render_unified_diff(std::slice::from_ref(&change));
        assert_eq!(crate::git::parse_unified_diff(&text), vec![change]);
    }
}
