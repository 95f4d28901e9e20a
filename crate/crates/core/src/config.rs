//! Pipeline configuration: one TOML file with a section per stage. Any key
//! can be overridden from the environment as `WM_<SECTION>_<KEY>`, e.g.
//! `WM_CLASSIFY_VOTE_K=3`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{GroupBy, YearKey};
use crate::error::{Error, Result};
use crate::secfilter::DEFAULT_THRESHOLD;
use crate::semvec::IdfBase;
use crate::szz::SzzConfig;
use crate::weakness::ExpDenominator;
use crate::wfc::DEFAULT_VOTE_K;

pub const ENV_PREFIX: &str = "WM_";
pub const MAX_PROVIDERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub manifest: PathBuf,
    /// Where repositories are cloned to (or already live, one per project id).
    pub repos_dir: PathBuf,
    #[serde(default = "default_min_commits")]
    pub min_commits: u64,
}

fn default_min_commits() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceConfig {
    pub dir: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub lexicon: Option<PathBuf>,
    pub classifier_cmd: Option<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            lexicon: None,
            classifier_cmd: None,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub catalog: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// Word vectors for the in-process TF-IDF provider.
    pub word_vectors: Option<PathBuf>,
    /// Precomputed sentence embeddings, one file per provider.
    #[serde(default)]
    pub exchange: Vec<PathBuf>,
    #[serde(default = "default_vote_k")]
    pub vote_k: usize,
    #[serde(default)]
    pub idf_base: IdfBase,
}

fn default_vote_k() -> usize {
    DEFAULT_VOTE_K
}

impl ClassifyConfig {
    pub fn provider_count(&self) -> usize {
        usize::from(self.word_vectors.is_some()) + self.exchange.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub ignore_suffixes: Option<Vec<String>>,
}

impl TraceConfig {
    pub fn szz(&self) -> SzzConfig {
        match &self.ignore_suffixes {
            Some(s) => SzzConfig {
                ignore_suffixes: s.clone(),
            },
            None => SzzConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeaknessConfig {
    #[serde(default)]
    pub exp_denominator: ExpDenominator,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default)]
    pub group_by: GroupBy,
    #[serde(default)]
    pub year_key: YearKey,
    pub libraries: Option<PathBuf>,
    pub goals: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub workspace: WorkspaceConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub weakness: WeaknessConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

/// Parses an environment override value as a TOML value, falling back to a
/// plain string.
fn env_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `WM_<SECTION>_<KEY>` overrides. Section names contain no
/// underscores, so the first one after the prefix separates section and key.
pub fn apply_overrides<I>(table: &mut toml::Table, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    for (name, value) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let Some((section, key)) = rest.split_once('_') else {
            continue;
        };
        let (section, key) = (section.to_lowercase(), key.to_lowercase());
        let entry = table
            .entry(section.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(sec) = entry else {
            return Err(Error::Config(format!("{section} is not a section")));
        };
        sec.insert(key, env_value(&value));
    }
    Ok(())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Parses config text with the given overrides; relative paths are taken
    /// relative to `base`.
    pub fn parse<I>(text: &str, base: &Path, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        apply_overrides(&mut table, vars)?;
        let mut cfg: PipelineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Reads a config file, applying overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, std::env::vars())
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.input.manifest);
        resolve(base, &mut self.input.repos_dir);
        resolve(base, &mut self.workspace.dir);
        for p in [
            &mut self.filter.lexicon,
            &mut self.classify.catalog,
            &mut self.classify.stopwords,
            &mut self.classify.word_vectors,
            &mut self.report.libraries,
            &mut self.report.goals,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
        for p in &mut self.classify.exchange {
            resolve(base, p);
        }
    }

    /// Checks every referenced input exists and numeric settings are in range.
    pub fn validate(&self) -> Result<()> {
        let must_exist = |what: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} not found: {}", p.display())))
            }
        };
        must_exist("manifest", &self.input.manifest)?;
        let optional = [
            ("lexicon", &self.filter.lexicon),
            ("catalog", &self.classify.catalog),
            ("stopwords", &self.classify.stopwords),
            ("word vectors", &self.classify.word_vectors),
            ("library map", &self.report.libraries),
            ("goal lexicon", &self.report.goals),
        ];
        for (what, p) in optional {
            if let Some(p) = p {
                must_exist(what, p)?;
            }
        }
        for p in &self.classify.exchange {
            must_exist("exchange file", p)?;
        }
        let providers = self.classify.provider_count();
        if providers == 0 || providers > MAX_PROVIDERS {
            return Err(Error::Config(format!(
                "need 1 to {MAX_PROVIDERS} embedding providers, found {providers}"
            )));
        }
        let k = self.classify.vote_k;
        if !(1..=MAX_PROVIDERS).contains(&k) || k > providers {
            return Err(Error::Config(format!(
                "vote_k {k} must be in 1..={} for {providers} providers",
                MAX_PROVIDERS.min(providers)
            )));
        }
        if self.workspace.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.filter.threshold) {
            return Err(Error::Config(format!(
                "threshold {} outside [0, 1]",
                self.filter.threshold
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[input]
manifest = "repos.txt"
repos_dir = "repos"

[workspace]
dir = "work"
jobs = 2

[classify]
word_vectors = "words.wvec"
exchange = ["m2.wvec", "m3.wvec", "m4.wvec", "m5.wvec"]
"#;

    fn no_env() -> Vec<(String, String)> {
        Vec::new()
    }

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = PipelineConfig::parse(MINIMAL, Path::new("/base"), no_env()).unwrap();
        assert_eq!(cfg.input.min_commits, 100);
        assert_eq!(cfg.classify.vote_k, 4);
        assert_eq!(cfg.filter.threshold, 0.5);
        assert_eq!(cfg.input.manifest, Path::new("/base/repos.txt"));
        assert_eq!(cfg.classify.exchange[3], Path::new("/base/m5.wvec"));
        assert_eq!(cfg.weakness.exp_denominator, ExpDenominator::Sum);
        assert_eq!(cfg.report.year_key, YearKey::T1);
        assert_eq!(cfg.trace.szz(), SzzConfig::default());
    }

    #[test]
    fn environment_overrides() {
        let vars = vec![
            ("WM_CLASSIFY_VOTE_K".to_string(), "3".to_string()),
            (
                "WM_FILTER_CLASSIFIER_CMD".to_string(),
                "./score.sh --fast".to_string(),
            ),
            ("WM_REPORT_YEAR_KEY".to_string(), "t2".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let cfg = PipelineConfig::parse(MINIMAL, Path::new("/b"), vars).unwrap();
        assert_eq!(cfg.classify.vote_k, 3);
        assert_eq!(
            cfg.filter.classifier_cmd.as_deref(),
            Some("./score.sh --fast")
        );
        assert_eq!(cfg.report.year_key, YearKey::T2);
    }

    #[test]
    fn validation_rejects_missing_paths_and_bad_k() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        for f in [
            "repos.txt",
            "words.wvec",
            "m2.wvec",
            "m3.wvec",
            "m4.wvec",
            "m5.wvec",
        ] {
            std::fs::write(d.join(f), "").unwrap();
        }
        let cfg = PipelineConfig::parse(MINIMAL, d, no_env()).unwrap();
        cfg.validate().unwrap();

        let mut bad = cfg.clone();
        bad.classify.catalog = Some(d.join("missing.jsonl"));
        assert!(matches!(bad.validate(), Err(Error::Config(m)) if m.contains("catalog")));

        for k in [0, 6] {
            let mut bad = cfg.clone();
            bad.classify.vote_k = k;
            assert!(bad.validate().is_err());
        }
        let mut few = cfg.clone();
        few.classify.exchange.truncate(1);
        assert!(few.validate().is_err(), "k = 4 with two providers");
        few.classify.vote_k = 2;
        few.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[trace]\njobz = 3\n");
        assert!(matches!(
            PipelineConfig::parse(&text, Path::new("/"), no_env()),
            Err(Error::Config(_))
        ));
    }
}
