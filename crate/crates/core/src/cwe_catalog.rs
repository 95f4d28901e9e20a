//! The CWE-699 category catalog used as the classification label space.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of child categories in CWE-699.
pub const EXPECTED_CATEGORY_COUNT: usize = 40;

pub const DEFAULT_CATALOG: &str = include_str!("../data/cwe699.jsonl");
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CweCategory {
    pub cwe_id: String,
    pub name: String,
    pub description: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

pub fn default_stopwords() -> Stopwords {
    Stopwords::parse(DEFAULT_STOPWORDS)
}

/// Lowercases, replaces punctuation with spaces, splits on whitespace and
/// drops stop words.
pub fn preprocess(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect::<String>()
        .to_lowercase();
    cleaned
        .split_whitespace()
        .filter(|t| !stopwords.contains(t))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Deserialize)]
struct RawCategory {
    id: String,
    name: String,
    description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    categories: Vec<CweCategory>,
    index: BTreeMap<String, usize>,
    warnings: Vec<String>,
}

impl Catalog {
    /// Parses one JSON object per line (`id`, `name`, `description`);
    /// blank lines and `#` comments are skipped.
    pub fn parse(text: &str, stopwords: &Stopwords) -> Result<Self> {
        let mut categories = Vec::new();
        let mut index = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let raw: RawCategory = serde_json::from_str(line)
                .map_err(|e| Error::CatalogMalformed(format!("line {}: {e}", idx + 1)))?;
            let cwe_id = raw.id.trim().to_string();
            if cwe_id.is_empty() {
                return Err(Error::CatalogMalformed(format!(
                    "line {}: empty id",
                    idx + 1
                )));
            }
            if index.contains_key(&cwe_id) {
                return Err(Error::CatalogMalformed(format!("duplicate id {cwe_id}")));
            }
            let tokens = preprocess(&raw.description, stopwords);
            if tokens.is_empty() {
                return Err(Error::CatalogMalformed(format!(
                    "{cwe_id}: description has no tokens after preprocessing"
                )));
            }
            index.insert(cwe_id.clone(), categories.len());
            categories.push(CweCategory {
                cwe_id,
                name: raw.name,
                description: raw.description,
                tokens,
            });
        }
        let mut warnings = Vec::new();
        if categories.len() != EXPECTED_CATEGORY_COUNT {
            let msg = format!(
                "catalog has {} categories, expected {EXPECTED_CATEGORY_COUNT}",
                categories.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(Catalog {
            categories,
            index,
            warnings,
        })
    }

    pub fn load_catalog(path: &Path, stopwords: &Stopwords) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, stopwords)
    }

    /// The bundled catalog with the bundled stop words.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_CATALOG, &default_stopwords()).expect("bundled catalog is valid")
    }

    pub fn categories(&self) -> &[CweCategory] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Non-fatal problems found while loading (size mismatch).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn has_size_mismatch(&self) -> bool {
        self.categories.len() != EXPECTED_CATEGORY_COUNT
    }

    pub fn get(&self, cwe_id: &str) -> Result<&CweCategory> {
        self.index
            .get(cwe_id)
            .map(|&i| &self.categories[i])
            .ok_or_else(|| Error::UnknownCategory(cwe_id.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preprocess_examples() {
        let sw: Stopwords = ["the"].into_iter().collect();
        assert_eq!(
            preprocess("The user interface fails", &sw),
            ["user", "interface", "fails"]
        );
        assert!(preprocess("", &sw).is_empty());
        assert_eq!(
            preprocess("Fix, fix FIX", &Stopwords::default()),
            ["fix", "fix", "fix"]
        );
    }

    #[test]
    fn builtin_catalog_has_forty_categories() {
        let c = Catalog::builtin();
        assert_eq!(c.len(), 40);
        assert!(!c.has_size_mismatch());
        assert_eq!(
            c.get("CWE-355").unwrap().name,
            "User Interface Security Issues"
        );
        assert!(matches!(c.get("CWE-9999"), Err(Error::UnknownCategory(_))));
        assert!(c.categories().iter().all(|cat| !cat.tokens.is_empty()));
    }

    #[test]
    fn duplicate_and_short_catalogs() {
        let sw = default_stopwords();
        let line = r#"{"id":"CWE-355","name":"UI","description":"user interface issues"}"#;
        let dup = format!("{line}\n{line}\n");
        assert!(matches!(
            Catalog::parse(&dup, &sw),
            Err(Error::CatalogMalformed(_))
        ));

        let short: String = DEFAULT_CATALOG
            .lines()
            .filter(|l| !l.starts_with('#'))
            .take(39)
            .map(|l| format!("{l}\n"))
            .collect();
        let c = Catalog::parse(&short, &sw).unwrap();
        assert_eq!(c.len(), 39);
        assert!(c.has_size_mismatch());
        assert_eq!(c.warnings().len(), 1);

        let missing = r#"{"id":"CWE-1","name":"x"}"#;
        assert!(matches!(
            Catalog::parse(missing, &sw),
            Err(Error::CatalogMalformed(_))
        ));
        let empty_desc = r#"{"id":"CWE-1","name":"x","description":"the a"}"#;
        assert!(matches!(
            Catalog::parse(empty_desc, &sw),
            Err(Error::CatalogMalformed(_))
        ));
    }
}
