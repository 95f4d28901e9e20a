//! Synthetic fixture corpus: small git repositories with scripted weakness
//! lifecycles whose contributing commits are known in advance, plus stub
//! embedding files so the whole pipeline runs without external models.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cwe_catalog::{preprocess, Catalog, Stopwords};
use crate::error::{Error, Result};
use crate::ingest::ProjectCategory;
use crate::semvec::ExchangeFile;
use crate::szz::UntraceableReason;

/// 2016-01-01T00:00:00Z.
pub const BASE_TIME: i64 = 1_451_606_400;
pub const DAY: i64 = 86_400;
pub const MIN_COMMITS: u64 = 10;
pub const WORD_DIM: usize = 12;
pub const EXCHANGE_DIM: usize = 8;
pub const EXCHANGE_PROVIDERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Author {
    pub name: &'static str,
    pub email: &'static str,
}

pub const ANN: Author = Author {
    name: "Ann",
    email: "ann@example.org",
};
pub const BOB: Author = Author {
    name: "Bob",
    email: "bob@example.org",
};
pub const CARA: Author = Author {
    name: "Cara",
    email: "cara@example.org",
};
pub const DAN: Author = Author {
    name: "Dan",
    email: "dan@example.org",
};
pub const ERIN: Author = Author {
    name: "Erin",
    email: "erin@example.org",
};

/// Drives the `git` CLI to build a repository with exact authors and dates.
pub struct RepoBuilder {
    dir: PathBuf,
    notes: usize,
}

impl RepoBuilder {
    pub fn init(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let b = RepoBuilder {
            dir: dir.to_path_buf(),
            notes: 0,
        };
        b.git(&["init", "-q", "-b", "main"], None)?;
        Ok(b)
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn git(&self, args: &[&str], who: Option<(Author, i64)>) -> Result<String> {
        let mut cmd = Command::new("git");
        cmd.arg("-C")
            .arg(&self.dir)
            .args(["-c", "commit.gpgsign=false", "-c", "core.autocrlf=false"])
            .args(args)
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("LC_ALL", "C");
        let (a, at) = who.unwrap_or((ANN, BASE_TIME));
        let date = format!("@{at} +0000");
        cmd.env("GIT_AUTHOR_NAME", a.name)
            .env("GIT_AUTHOR_EMAIL", a.email)
            .env("GIT_AUTHOR_DATE", &date)
            .env("GIT_COMMITTER_NAME", a.name)
            .env("GIT_COMMITTER_EMAIL", a.email)
            .env("GIT_COMMITTER_DATE", &date);
        let out = cmd.output()?;
        if !out.status.success() {
            return Err(Error::Git(format!(
                "git {}: {}",
                args.join(" "),
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
    }

    pub fn write(&self, path: &str, lines: &[String]) -> Result<()> {
        let full = self.dir.join(path);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut text = lines.join("\n");
        text.push('\n');
        std::fs::write(full, text)?;
        Ok(())
    }

    pub fn write_bytes(&self, path: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(path), bytes)?;
        Ok(())
    }

    pub fn read(&self, path: &str) -> Result<Vec<String>> {
        Ok(std::fs::read_to_string(self.dir.join(path))?
            .lines()
            .map(str::to_string)
            .collect())
    }

    /// Applies `f` to the file's lines (1-based indices in the closure are the
    /// caller's business).
    pub fn edit(&self, path: &str, f: impl FnOnce(&mut Vec<String>)) -> Result<()> {
        let mut lines = self.read(path)?;
        f(&mut lines);
        self.write(path, &lines)
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<()> {
        self.git(&["mv", from, to], None).map(|_| ())
    }

    pub fn commit(&self, author: Author, day: i64, message: &str) -> Result<String> {
        let at = BASE_TIME + day * DAY;
        self.git(&["add", "-A"], None)?;
        self.git(
            &["commit", "-q", "--allow-empty", "-m", message],
            Some((author, at)),
        )?;
        self.git(&["rev-parse", "HEAD"], None)
    }

    pub fn checkout(&self, branch: &str, create_from: Option<&str>) -> Result<()> {
        match create_from {
            Some(rev) => self.git(&["checkout", "-q", "-b", branch, rev], None),
            None => self.git(&["checkout", "-q", branch], None),
        }
        .map(|_| ())
    }

    pub fn merge(&self, branch: &str, author: Author, day: i64, message: &str) -> Result<String> {
        let at = BASE_TIME + day * DAY;
        self.git(
            &["merge", "-q", "--no-ff", "-m", message, branch],
            Some((author, at)),
        )?;
        self.git(&["rev-parse", "HEAD"], None)
    }

    /// Appends a line to a notes file; used to pad histories with commits
    /// that never matter to tracing.
    pub fn pad(&mut self, author: Author, day: i64) -> Result<String> {
        self.notes += 1;
        let path = "docs/notes.md";
        let mut lines = if self.dir.join(path).exists() {
            self.read(path)?
        } else {
            vec![]
        };
        lines.push(format!("note {}", self.notes));
        self.write(path, &lines)?;
        self.commit(author, day, &format!("update notes {}", self.notes))
    }
}

/// Numbered source lines `<prefix>_<i> = <i>;`, 1-based.
pub fn source_lines(prefix: &str, n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("var {prefix}_{i} = {i};"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Plan {
    /// All exchange providers rank this category first.
    Assign(String),
    /// Exchange providers split two against two.
    Disagree(String, String),
    /// Every provider yields a zero vector, so the positivity gate fails.
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedFix {
    pub project: String,
    pub hash: String,
    pub message: String,
    pub plan: Plan,
    pub expected_wccs: BTreeSet<String>,
    pub expected_reason: Option<UntraceableReason>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthProject {
    pub id: String,
    pub origin: PathBuf,
    pub category: ProjectCategory,
    pub commits: usize,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub projects: Vec<SynthProject>,
    pub fixes: Vec<PlannedFix>,
    /// Projects below `MIN_COMMITS`, listed in the manifest but never selected.
    pub excluded: Vec<String>,
    /// Weakness count after deduplication, known from the script.
    pub expected_weaknesses: usize,
}

impl SynthCorpus {
    pub fn security_hashes(&self) -> BTreeSet<(String, String)> {
        self.fixes
            .iter()
            .map(|f| (f.project.clone(), f.hash.clone()))
            .collect()
    }

    pub fn wfc_hashes(&self) -> BTreeSet<(String, String)> {
        self.fixes
            .iter()
            .filter(|f| matches!(f.plan, Plan::Assign(_)))
            .map(|f| (f.project.clone(), f.hash.clone()))
            .collect()
    }

    pub fn total_commits(&self) -> usize {
        self.projects.iter().map(|p| p.commits).sum()
    }
}

struct Script<'a> {
    project: &'a str,
    fixes: Vec<PlannedFix>,
}

impl Script<'_> {
    fn fix(
        &mut self,
        hash: String,
        message: &str,
        plan: Plan,
        wccs: &[&String],
        reason: Option<UntraceableReason>,
    ) {
        self.fixes.push(PlannedFix {
            project: self.project.to_string(),
            hash,
            message: message.to_string(),
            plan,
            expected_wccs: wccs.iter().map(|s| s.to_string()).collect(),
            expected_reason: reason,
        });
    }
}

fn count_commits(b: &RepoBuilder) -> Result<usize> {
    b.git(&["rev-list", "--all", "--count"], None)?
        .parse()
        .map_err(|_| Error::Git("bad rev-list count".into()))
}

fn cwe(id: &str) -> Plan {
    Plan::Assign(id.to_string())
}

/// Nested chains (two fixes sharing the origin commit merge into one
/// weakness) and a separate weakness from an unrelated change.
fn alpha(root: &Path) -> Result<(usize, Vec<PlannedFix>)> {
    let mut b = RepoBuilder::init(root)?;
    let mut s = Script {
        project: "alpha",
        fixes: vec![],
    };
    let f = "src/Grip.cs";
    b.write(f, &source_lines("grip", 10))?;
    let c1 = b.commit(ANN, 0, "initial import")?;
    for d in 1..5 {
        b.pad(if d % 2 == 0 { ANN } else { BOB }, d)?;
    }
    b.edit(f, |l| l[3] = "var grip_4 = 40;".into())?;
    let c2 = b.commit(BOB, 8, "improve grip threshold")?;
    b.edit(f, |l| l[7] = "var grip_8 = 80;".into())?;
    let c3 = b.commit(ANN, 10, "refactor haptics")?;
    b.pad(BOB, 11)?;

    b.edit(f, |l| l[0] = "var grip_1 = clamp(1);".into())?;
    let m = "fix overflow in grip handler";
    let w1 = b.commit(ANN, 12, m)?;
    s.fix(w1, m, cwe("CWE-1219"), &[&c1], None);

    b.edit(f, |l| {
        l[1] = "var grip_2 = clamp(2);".into();
        l[3] = "var grip_4 = clamp(40);".into();
    })?;
    let m = "patch grip handler again";
    let w2 = b.commit(BOB, 15, m)?;
    s.fix(w2, m, cwe("CWE-1219"), &[&c1, &c2], None);

    b.edit(f, |l| l[7] = "var grip_8 = clamp(80);".into())?;
    let m = "resolve exposure of haptic state";
    let w3 = b.commit(ANN, 18, m)?;
    s.fix(w3, m, cwe("CWE-355"), &[&c3], None);
    for d in 19..22 {
        b.pad(ANN, d)?;
    }
    Ok((count_commits(&b)?, s.fixes))
}

/// Pure-addition fix, plus a gate rejection and a vote disagreement.
fn bravo(root: &Path) -> Result<(usize, Vec<PlannedFix>)> {
    let mut b = RepoBuilder::init(root)?;
    let mut s = Script {
        project: "bravo",
        fixes: vec![],
    };
    let f = "src/Bounds.cs";
    b.write(f, &source_lines("bounds", 6))?;
    b.commit(CARA, 0, "initial import")?;
    for d in 1..8 {
        b.pad(CARA, d)?;
    }
    b.edit(f, |l| l.insert(3, "if (idx >= len) return;".into()))?;
    let m = "fix missing bounds check";
    let w = b.commit(CARA, 9, m)?;
    s.fix(
        w,
        m,
        cwe("CWE-1218"),
        &[],
        Some(UntraceableReason::PureAddition),
    );

    b.edit(f, |l| l[0] = "var bounds_1 = 0;".into())?;
    let m = "xss qqzx";
    let w = b.commit(DAN, 10, m)?;
    s.fix(w, m, Plan::Reject, &[], None);

    b.edit(f, |l| l[5] = "var bounds_6 = 0;".into())?;
    let m = "fix threat in teleport validation";
    let w = b.commit(DAN, 11, m)?;
    s.fix(
        w,
        m,
        Plan::Disagree("CWE-355".into(), "CWE-465".into()),
        &[],
        None,
    );
    b.pad(CARA, 12)?;
    Ok((count_commits(&b)?, s.fixes))
}

/// Lines from three authors removed by one fix; a removed blank line from a
/// fourth author must not count.
fn charlie(root: &Path) -> Result<(usize, Vec<PlannedFix>)> {
    let mut b = RepoBuilder::init(root)?;
    let mut s = Script {
        project: "charlie",
        fixes: vec![],
    };
    let f = "src/Input.cs";
    b.write(f, &source_lines("input", 8))?;
    let c1 = b.commit(ANN, 0, "initial import")?;
    b.pad(DAN, 1)?;
    b.edit(f, |l| l[1] = "var input_2 = read();".into())?;
    let c2 = b.commit(BOB, 3, "add controller input")?;
    b.edit(f, |l| l[3] = "var input_4 = poll();".into())?;
    let c3 = b.commit(CARA, 5, "implement tracker polling")?;
    b.edit(f, |l| l.insert(5, String::new()))?;
    b.commit(ERIN, 6, "spacing")?;
    for d in 7..12 {
        b.pad(DAN, d)?;
    }
    b.edit(f, |l| {
        l.remove(5);
        l.remove(3);
        l.remove(1);
        l.remove(0);
    })?;
    let m = "fix vulnerability in input parsing";
    let w = b.commit(DAN, 13, m)?;
    s.fix(w, m, cwe("CWE-1215"), &[&c1, &c2, &c3], None);
    Ok((count_commits(&b)?, s.fixes))
}

/// A renamed file traced back past the rename; an ignored asset file is
/// not traced.
fn delta(root: &Path) -> Result<(usize, Vec<PlannedFix>)> {
    let mut b = RepoBuilder::init(root)?;
    let mut s = Script {
        project: "delta",
        fixes: vec![],
    };
    b.write("Assets/Old.cs", &source_lines("cam", 12))?;
    let c1 = b.commit(ANN, 0, "initial import")?;
    b.write("Assets/Main.unity", &source_lines("scene", 5))?;
    b.commit(BOB, 1, "add scene")?;
    b.rename("Assets/Old.cs", "Assets/Camera.cs")?;
    b.commit(ANN, 2, "rename camera script")?;
    b.edit("Assets/Camera.cs", |l| l[2] = "var cam_3 = fov();".into())?;
    let c3 = b.commit(BOB, 4, "update camera field of view")?;
    for d in 5..10 {
        b.pad(BOB, d)?;
    }
    b.edit("Assets/Camera.cs", |l| {
        l.remove(2);
        l.remove(1);
    })?;
    b.edit("Assets/Main.unity", |l| {
        l.remove(0);
    })?;
    let m = "fix weakness in camera bounds";
    let w = b.commit(ANN, 11, m)?;
    s.fix(w, m, cwe("CWE-1228"), &[&c1, &c3], None);
    Ok((count_commits(&b)?, s.fixes))
}

/// A fix delivered as a merge commit, traced through its first parent,
/// followed by an ordinary fix.
fn echo(root: &Path) -> Result<(usize, Vec<PlannedFix>)> {
    let mut b = RepoBuilder::init(root)?;
    let mut s = Script {
        project: "echo",
        fixes: vec![],
    };
    let f = "src/Hand.cs";
    b.write(f, &source_lines("hand", 8))?;
    let c1 = b.commit(BOB, 0, "initial import")?;
    b.pad(BOB, 1)?;
    b.checkout("hotfix", Some("HEAD"))?;
    b.edit(f, |l| l[1] = "var hand_2 = 0;".into())?;
    b.commit(CARA, 3, "tidy hand values")?;
    b.checkout("main", None)?;
    b.edit(f, |l| l[6] = "var hand_7 = grab();".into())?;
    let c2 = b.commit(BOB, 4, "new grab gesture")?;
    b.pad(BOB, 5)?;
    let m = "Merge hotfix: fix exposure in hand values";
    let w = b.merge("hotfix", BOB, 6, m)?;
    s.fix(w, m, cwe("CWE-1006"), &[&c1], None);
    for d in 7..10 {
        b.pad(CARA, d)?;
    }
    b.edit(f, |l| {
        l.remove(6);
    })?;
    let m = "fix bug in grab gesture";
    let w = b.commit(CARA, 12, m)?;
    s.fix(w, m, cwe("CWE-1006"), &[&c2], None);
    Ok((count_commits(&b)?, s.fixes))
}

fn tiny(root: &Path) -> Result<usize> {
    let mut b = RepoBuilder::init(root)?;
    b.write("README.md", &["tiny".to_string()])?;
    b.commit(ANN, 0, "initial import")?;
    b.pad(ANN, 1)?;
    count_commits(&b)
}

/// Builds the corpus under `root`: `origin/<id>` repositories and a
/// `manifest.txt` listing them.
pub fn build_corpus(root: &Path) -> Result<SynthCorpus> {
    type Builder = fn(&Path) -> Result<(usize, Vec<PlannedFix>)>;
    let scripts: [(&str, ProjectCategory, Builder); 5] = [
        ("alpha", ProjectCategory::Plugin, alpha),
        ("bravo", ProjectCategory::Game, bravo),
        ("charlie", ProjectCategory::Sdk, charlie),
        ("delta", ProjectCategory::Utility, delta),
        ("echo", ProjectCategory::Plugin, echo),
    ];
    let origin = root.join("origin");
    let mut projects = Vec::new();
    let mut fixes = Vec::new();
    let mut manifest = String::from("# synthetic corpus\n");
    for (id, category, build) in scripts {
        let path = origin.join(id);
        let (commits, planned) = build(&path)?;
        manifest.push_str(&format!(
            "{} id={id} category={}\n",
            path.display(),
            category.as_str()
        ));
        projects.push(SynthProject {
            id: id.to_string(),
            origin: path,
            category,
            commits,
        });
        fixes.extend(planned);
    }
    let tiny_path = origin.join("tiny");
    tiny(&tiny_path)?;
    manifest.push_str(&format!(
        "{} id=tiny category=tutorial\n",
        tiny_path.display()
    ));

    let manifest_path = root.join("manifest.txt");
    std::fs::write(&manifest_path, manifest)?;
    Ok(SynthCorpus {
        root: root.to_path_buf(),
        manifest: manifest_path,
        projects,
        fixes,
        excluded: vec!["tiny".to_string()],
        // alpha: two nested fixes merge, one separate; bravo: the untraced
        // pure addition; charlie, delta: one each; echo: two.
        expected_weaknesses: 7,
    })
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[derive(Debug, Clone)]
pub struct StubVectors {
    pub word_vectors: PathBuf,
    pub exchange: Vec<PathBuf>,
}

/// Writes a word-vector file for the in-process provider and one exchange
/// file per stub provider, realizing each fix's plan.
pub fn write_stub_vectors(
    corpus: &SynthCorpus,
    catalog: &Catalog,
    stopwords: &Stopwords,
    dir: &Path,
    seed: u64,
) -> Result<StubVectors> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut vocab: BTreeSet<String> = catalog
        .categories()
        .iter()
        .flat_map(|c| c.tokens.iter().cloned())
        .collect();
    for f in &corpus.fixes {
        if f.plan != Plan::Reject {
            vocab.extend(preprocess(&f.message, stopwords));
        }
    }
    let rejected: BTreeSet<String> = corpus
        .fixes
        .iter()
        .filter(|f| f.plan == Plan::Reject)
        .flat_map(|f| preprocess(&f.message, stopwords))
        .collect();
    let mut words = ExchangeFile::new(WORD_DIM);
    for w in vocab.difference(&rejected) {
        words
            .records
            .push((w.clone(), random_vector(&mut rng, WORD_DIM)));
    }
    let word_vectors = dir.join("words.wvec");
    words.save(&word_vectors)?;

    let mut exchange = Vec::new();
    for p in 0..EXCHANGE_PROVIDERS {
        let scale = rng.gen_range(0.5..4.0);
        let mut file = ExchangeFile::new(EXCHANGE_DIM);
        file.comments.push(format!("model_revision=stub-{}", p + 2));
        let cats: BTreeMap<&str, Vec<f64>> = catalog
            .categories()
            .iter()
            .map(|c| (c.cwe_id.as_str(), random_vector(&mut rng, EXCHANGE_DIM)))
            .collect();
        for (id, v) in &cats {
            file.records.push((id.to_string(), v.clone()));
        }
        for f in &corpus.fixes {
            let target = match &f.plan {
                Plan::Assign(c) => Some(c.as_str()),
                Plan::Disagree(a, b) => Some(if p < EXCHANGE_PROVIDERS / 2 {
                    a.as_str()
                } else {
                    b.as_str()
                }),
                Plan::Reject => None,
            };
            let v = match target {
                Some(c) => {
                    let base = cats
                        .get(c)
                        .ok_or_else(|| Error::UnknownCategory(c.to_string()))?;
                    base.iter()
                        .map(|x| scale * (x + rng.gen_range(-1e-3..1e-3)))
                        .collect()
                }
                None => vec![0.0; EXCHANGE_DIM],
            };
            file.records.push((f.hash.clone(), v));
        }
        let path = dir.join(format!("model{}.wvec", p + 2));
        file.save(&path)?;
        exchange.push(path);
    }
    Ok(StubVectors {
        word_vectors,
        exchange,
    })
}

/// Writes a pipeline config for the corpus and returns its path.
pub fn write_config(
    corpus: &SynthCorpus,
    stubs: &StubVectors,
    workspace: &Path,
    jobs: usize,
) -> Result<PathBuf> {
    let q = |p: &Path| format!("{:?}", p.display().to_string());
    let exchange: Vec<String> = stubs.exchange.iter().map(|p| q(p)).collect();
    let text = format!(
        "[input]\nmanifest = {}\nrepos_dir = {}\nmin_commits = {MIN_COMMITS}\n\n\
         [workspace]\ndir = {}\njobs = {jobs}\n\n\
         [classify]\nword_vectors = {}\nexchange = [{}]\nvote_k = 4\n",
        q(&corpus.manifest),
        q(&corpus.root.join("repos")),
        q(workspace),
        q(&stubs.word_vectors),
        exchange.join(", "),
    );
    let path = corpus.root.join("pipeline.toml");
    std::fs::write(&path, text)?;
    Ok(path)
}
