#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tempfile::TempDir;
use weaknessminer::cwe_catalog::{default_stopwords, Catalog};
use weaknessminer::synth::{self, StubVectors, SynthCorpus};
use weaknessminer::szz::{Wcc, WccChain};
use weaknessminer::wfc::{Decision, WfcAssignment};

pub struct Fixture {
    pub dir: TempDir,
    pub corpus: SynthCorpus,
    pub stubs: StubVectors,
}

impl Fixture {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let corpus = synth::build_corpus(&dir.path().join("corpus")).unwrap();
        let stubs = synth::write_stub_vectors(
            &corpus,
            &Catalog::builtin(),
            &default_stopwords(),
            &dir.path().join("vectors"),
            7,
        )
        .unwrap();
        Fixture { dir, corpus, stubs }
    }

    pub fn config(&self, workspace: &str, jobs: usize) -> PathBuf {
        let ws = self.dir.path().join(workspace);
        let path = synth::write_config(&self.corpus, &self.stubs, &ws, jobs).unwrap();
        let renamed = self.dir.path().join(format!("{workspace}.toml"));
        std::fs::rename(path, &renamed).unwrap();
        renamed
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }
}

/// Every file under `root`, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn assignment(project: &str, hash: &str, cwe: &str) -> WfcAssignment {
    WfcAssignment {
        project: project.into(),
        commit_hash: hash.into(),
        decision: Decision::Assigned(cwe.into()),
        votes: BTreeMap::new(),
        scores: vec![],
        gate_passed: true,
        review_cause: None,
    }
}

/// A traced chain; `wccs` are (hash, time) pairs in any order.
pub fn chain(project: &str, wfc: &str, at: i64, wccs: &[(&str, i64)]) -> WccChain {
    let mut wccs: Vec<Wcc> = wccs
        .iter()
        .map(|(h, t)| Wcc {
            hash: h.to_string(),
            authored_at: *t,
        })
        .collect();
    wccs.sort_by(|a, b| (a.authored_at, &a.hash).cmp(&(b.authored_at, &b.hash)));
    WccChain {
        project: project.into(),
        wfc_hash: wfc.into(),
        wfc_authored_at: at,
        traced: !wccs.is_empty(),
        wccs,
        untraceable_reason: None,
        failures: vec![],
    }
}

/// The deduplication topology of the paper's worked example: 79373 nests in
/// cce8d with the same origin c4ale; 76142 nests in cce8d but starts at f8eld.
pub fn fig6() -> Vec<(WfcAssignment, Option<WccChain>, i64)> {
    let day = 86_400;
    let c4ale = ("c4ale0000000", day);
    let f8eld = ("f8eld0000000", 3 * day);
    let mid = ("9a1b20000000", 5 * day);
    vec![
        (
            assignment("p", "79373aaaaaaa", "CWE-1219"),
            Some(chain("p", "79373aaaaaaa", 10 * day, &[c4ale, mid])),
            10 * day,
        ),
        (
            assignment("p", "76142bbbbbbb", "CWE-1219"),
            Some(chain("p", "76142bbbbbbb", 12 * day, &[f8eld, mid])),
            12 * day,
        ),
        (
            assignment("p", "cce8dccccccc", "CWE-1219"),
            Some(chain("p", "cce8dccccccc", 20 * day, &[c4ale, f8eld, mid])),
            20 * day,
        ),
    ]
}
