//! Sentence vectors: TF-IDF weighted averages of word vectors, pre-computed
//! vectors loaded from exchange files, and cosine similarity.
//!
//! Term frequency is normalized by the token count of the text it is computed
//! for (a category description or a commit message), so each category's TF
//! values form a distribution. Inverse document frequency is
//! `log(category_count / (1 + doc_freq))` and is allowed to go negative for
//! words present in every category.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cwe_catalog::{preprocess, Catalog, CweCategory, Stopwords};
use crate::error::{Error, Result};

pub const EXCHANGE_MAGIC: &str = "WVEC1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum IdfBase {
    #[default]
    Log10,
    Log2,
}

impl IdfBase {
    fn log(self, x: f64) -> f64 {
        match self {
            IdfBase::Log10 => x.log10(),
            IdfBase::Log2 => x.log2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub term_counts: BTreeMap<String, BTreeMap<String, u64>>,
    pub doc_freq: BTreeMap<String, u64>,
    pub category_count: usize,
    #[serde(default)]
    pub idf_base: IdfBase,
    totals: BTreeMap<String, u64>,
}

impl CorpusStats {
    /// Counts tokens per category. `category_count` defaults to the number of
    /// documents supplied.
    pub fn from_documents<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a [String])>,
    {
        let mut term_counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        let mut totals = BTreeMap::new();
        for (id, tokens) in docs {
            let counts = term_counts.entry(id.to_string()).or_default();
            for t in tokens {
                *counts.entry(t.clone()).or_default() += 1;
            }
            *totals.entry(id.to_string()).or_default() += tokens.len() as u64;
        }
        let mut doc_freq: BTreeMap<String, u64> = BTreeMap::new();
        for counts in term_counts.values() {
            for word in counts.keys() {
                *doc_freq.entry(word.clone()).or_default() += 1;
            }
        }
        CorpusStats {
            category_count: term_counts.len(),
            term_counts,
            doc_freq,
            idf_base: IdfBase::Log10,
            totals,
        }
    }

    pub fn from_catalog(catalog: &Catalog) -> Self {
        Self::from_documents(
            catalog
                .categories()
                .iter()
                .map(|c| (c.cwe_id.as_str(), c.tokens.as_slice())),
        )
    }

    pub fn with_idf_base(mut self, base: IdfBase) -> Self {
        self.idf_base = base;
        self
    }

    pub fn with_category_count(mut self, n: usize) -> Self {
        self.category_count = n;
        self
    }

    pub fn category_tokens(&self, category: &str) -> Result<u64> {
        self.totals
            .get(category)
            .copied()
            .ok_or_else(|| Error::UnknownCategory(category.to_string()))
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.term_counts.keys().map(String::as_str)
    }
}

pub fn compute_tf(word: &str, category: &str, stats: &CorpusStats) -> Result<f64> {
    let counts = stats
        .term_counts
        .get(category)
        .ok_or_else(|| Error::UnknownCategory(category.to_string()))?;
    let total = stats.category_tokens(category)?;
    let n = counts.get(word).copied().unwrap_or(0);
    if total == 0 {
        return Ok(0.0);
    }
    Ok(n as f64 / total as f64)
}

pub fn compute_idf(word: &str, stats: &CorpusStats) -> f64 {
    let df = stats.doc_freq.get(word).copied().unwrap_or(0);
    stats
        .idf_base
        .log(stats.category_count as f64 / (1.0 + df as f64))
}

pub fn compute_tfidf(word: &str, category: &str, stats: &CorpusStats) -> Result<f64> {
    Ok(compute_tf(word, category, stats)? * compute_idf(word, stats))
}

/// TF-IDF weight of every distinct word of a category.
pub fn category_weights(category: &str, stats: &CorpusStats) -> Result<BTreeMap<String, f64>> {
    let counts = stats
        .term_counts
        .get(category)
        .ok_or_else(|| Error::UnknownCategory(category.to_string()))?;
    counts
        .keys()
        .map(|w| Ok((w.clone(), compute_tfidf(w, category, stats)?)))
        .collect()
}

/// Weights for a message: in-message term frequency times corpus IDF.
pub fn message_weights(tokens: &[String], stats: &CorpusStats) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let total = tokens.len() as f64;
    counts
        .into_iter()
        .map(|(w, n)| (w.to_string(), n as f64 / total * compute_idf(w, stats)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceVector {
    pub values: Vec<f64>,
    pub source_id: String,
}

impl SentenceVector {
    pub fn zeros(dimension: usize, source_id: impl Into<String>) -> Self {
        SentenceVector {
            values: vec![0.0; dimension],
            source_id: source_id.into(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordVectorTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVectorTable {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(WordVectorTable {
            dimension,
            vectors: HashMap::new(),
        })
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                left: self.dimension,
                right: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite vector component".into()));
        }
        self.vectors.insert(word.into(), vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = ExchangeFile::load(path)?;
        let mut table = WordVectorTable::new(file.dimension)?;
        for (word, v) in file.records {
            table.vectors.insert(word, v);
        }
        Ok(table)
    }
}

/// Weighted mean of the word vectors of the distinct tokens that have both a
/// weight and a vector. Returns `(vector, covered)`; when nothing is covered
/// or the weights sum to zero the vector is all zeros and `covered` is false.
pub fn sentence_vector(
    tokens: &[String],
    weights: &BTreeMap<String, f64>,
    table: &WordVectorTable,
    source_id: &str,
) -> (SentenceVector, bool) {
    let d = table.dimension();
    let mut acc = vec![0.0; d];
    let mut weight_sum = 0.0;
    let mut seen: Vec<&str> = Vec::new();
    let mut distinct: Vec<&str> = tokens.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    for word in distinct {
        let (Some(&w), Some(v)) = (weights.get(word), table.get(word)) else {
            continue;
        };
        seen.push(word);
        weight_sum += w;
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    if seen.is_empty() || weight_sum == 0.0 {
        return (SentenceVector::zeros(d, source_id), false);
    }
    for a in &mut acc {
        *a /= weight_sum;
    }
    (
        SentenceVector {
            values: acc,
            source_id: source_id.to_string(),
        },
        true,
    )
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &SentenceVector, v: &SentenceVector) -> Result<f64> {
    if u.dimension() != v.dimension() {
        return Err(Error::DimensionMismatch {
            left: u.dimension(),
            right: v.dimension(),
        });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Text to embed: either a catalog category or a commit message.
#[derive(Debug, Clone, Copy)]
pub enum TextRef<'a> {
    Category(&'a CweCategory),
    Message { id: &'a str, text: &'a str },
}

impl TextRef<'_> {
    pub fn id(&self) -> &str {
        match self {
            TextRef::Category(c) => &c.cwe_id,
            TextRef::Message { id, .. } => id,
        }
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, item: TextRef<'_>) -> Result<SentenceVector>;
}

/// TF-IDF weighted word vectors, computed in-process.
#[derive(Debug, Clone)]
pub struct TfIdfProvider {
    id: String,
    stats: CorpusStats,
    table: WordVectorTable,
    stopwords: Stopwords,
    category_vectors: BTreeMap<String, SentenceVector>,
}

impl TfIdfProvider {
    pub fn new(
        id: impl Into<String>,
        catalog: &Catalog,
        stats: CorpusStats,
        table: WordVectorTable,
        stopwords: Stopwords,
    ) -> Result<Self> {
        let mut category_vectors = BTreeMap::new();
        for cat in catalog.categories() {
            let weights = category_weights(&cat.cwe_id, &stats)?;
            let (v, _) = sentence_vector(&cat.tokens, &weights, &table, &cat.cwe_id);
            category_vectors.insert(cat.cwe_id.clone(), v);
        }
        Ok(TfIdfProvider {
            id: id.into(),
            stats,
            table,
            stopwords,
            category_vectors,
        })
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    /// Message vector plus whether any of its words were covered.
    pub fn embed_message(&self, id: &str, text: &str) -> (SentenceVector, bool) {
        let tokens = preprocess(text, &self.stopwords);
        let weights = message_weights(&tokens, &self.stats);
        sentence_vector(&tokens, &weights, &self.table, id)
    }
}

impl EmbeddingProvider for TfIdfProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.table.dimension()
    }

    fn embed(&self, item: TextRef<'_>) -> Result<SentenceVector> {
        match item {
            TextRef::Category(c) => self
                .category_vectors
                .get(&c.cwe_id)
                .cloned()
                .ok_or_else(|| Error::UnknownCategory(c.cwe_id.clone())),
            TextRef::Message { id, text } => Ok(self.embed_message(id, text).0),
        }
    }
}

/// Serves vectors stored in an exchange file, keyed by text id.
#[derive(Debug, Clone)]
pub struct ExchangeProvider {
    id: String,
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl ExchangeProvider {
    pub fn from_vectors<I>(id: impl Into<String>, dimension: usize, vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut map = HashMap::new();
        for (key, v) in vectors {
            if v.len() != dimension {
                return Err(Error::DimensionMismatch {
                    left: dimension,
                    right: v.len(),
                });
            }
            map.insert(key, v);
        }
        Ok(ExchangeProvider {
            id: id.into(),
            dimension,
            vectors: map,
        })
    }

    pub fn from_exchange(id: impl Into<String>, file: ExchangeFile) -> Self {
        ExchangeProvider {
            id: id.into(),
            dimension: file.dimension,
            vectors: file.records.into_iter().collect(),
        }
    }
}

pub fn load_exchange_file(id: impl Into<String>, path: &Path) -> Result<ExchangeProvider> {
    Ok(ExchangeProvider::from_exchange(
        id,
        ExchangeFile::load(path)?,
    ))
}

impl EmbeddingProvider for ExchangeProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, item: TextRef<'_>) -> Result<SentenceVector> {
        let key = item.id();
        self.vectors
            .get(key)
            .map(|v| SentenceVector {
                values: v.clone(),
                source_id: key.to_string(),
            })
            .ok_or_else(|| Error::UnknownTextId {
                provider: self.id.clone(),
                id: key.to_string(),
            })
    }
}

/// Parsed contents of a `WVEC1` exchange file, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeFile {
    pub dimension: usize,
    pub records: Vec<(String, Vec<f64>)>,
    /// `#` lines following the header, without the leading `#`.
    pub comments: Vec<String>,
}

impl ExchangeFile {
    pub fn new(dimension: usize) -> Self {
        ExchangeFile {
            dimension,
            records: Vec::new(),
            comments: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::ExchangeMalformed { line, reason };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
        let dimension = header
            .strip_prefix(EXCHANGE_MAGIC)
            .and_then(|r| r.trim().strip_prefix("dim="))
            .and_then(|d| d.trim().parse::<usize>().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| {
                bad(
                    1,
                    format!("expected `{EXCHANGE_MAGIC} dim=<d>`, got {header:?}"),
                )
            })?;
        let mut file = ExchangeFile::new(dimension);
        let mut seen = std::collections::HashSet::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                file.comments.push(comment.trim().to_string());
                continue;
            }
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| bad(lineno, "missing tab separator".into()))?;
            if id.is_empty() {
                return Err(bad(lineno, "empty id".into()));
            }
            let values = values
                .split(',')
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| bad(lineno, format!("bad value {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != dimension {
                return Err(bad(
                    lineno,
                    format!("{} values, header says dim={dimension}", values.len()),
                ));
            }
            if !seen.insert(id.to_string()) {
                return Err(bad(lineno, format!("duplicate id {id:?}")));
            }
            file.records.push((id.to_string(), values));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes with shortest round-trip float formatting.
    pub fn render(&self) -> String {
        let mut out = format!("{EXCHANGE_MAGIC} dim={}\n", self.dimension);
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        for (id, values) in &self.records {
            out.push_str(id);
            out.push('\t');
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    /// Forty categories where `word` occurs in the first `df` of them.
    fn forty_with(word: &str, df: usize) -> CorpusStats {
        let docs: Vec<(String, Vec<String>)> = (0..40)
            .map(|i| {
                let mut t = vec![format!("filler{i}")];
                if i < df {
                    t.push(word.to_string());
                }
                (format!("CWE-{i}"), t)
            })
            .collect();
        CorpusStats::from_documents(docs.iter().map(|(id, t)| (id.as_str(), t.as_slice())))
    }

    #[test]
    fn tf_examples() {
        let doc = toks("a a b c d e f g h i");
        let stats = CorpusStats::from_documents([("c1", doc.as_slice())]);
        assert_eq!(compute_tf("a", "c1", &stats).unwrap(), 0.2);
        assert_eq!(compute_tf("zzz", "c1", &stats).unwrap(), 0.0);
        assert!(matches!(
            compute_tf("a", "nope", &stats),
            Err(Error::UnknownCategory(_))
        ));

        let single = toks("only");
        let stats = CorpusStats::from_documents([("c1", single.as_slice())]);
        assert_eq!(compute_tf("only", "c1", &stats).unwrap(), 1.0);
    }

    #[test]
    fn idf_examples() {
        assert_eq!(compute_idf("w", &forty_with("w", 3)), 1.0);
        assert!((compute_idf("w", &forty_with("w", 0)) - 1.602_059_991_327_962_4).abs() < 1e-12);
        let negative = compute_idf("w", &forty_with("w", 40));
        assert!((negative - (40.0f64 / 41.0).log10()).abs() < 1e-15);
        assert!((negative + 0.010_723_865_391_773_066).abs() < 1e-12);

        let base2 = forty_with("w", 3).with_idf_base(IdfBase::Log2);
        assert!((compute_idf("w", &base2) - 10f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn tfidf_examples() {
        // "w" twice in a 10-token category, doc_freq 3 of 40.
        let mut docs: Vec<(String, Vec<String>)> = (0..40)
            .map(|i| (format!("CWE-{i}"), vec![format!("filler{i}")]))
            .collect();
        docs[0].1 = toks("w w f1 f2 f3 f4 f5 f6 f7 f8");
        docs[1].1.push("w".into());
        docs[2].1.push("w".into());
        let stats =
            CorpusStats::from_documents(docs.iter().map(|(id, t)| (id.as_str(), t.as_slice())));
        assert!((compute_tfidf("w", "CWE-0", &stats).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(compute_tfidf("absent", "CWE-0", &stats).unwrap(), 0.0);

        // TF = 0.1 with doc_freq = 40.
        let docs: Vec<(String, Vec<String>)> = (0..40)
            .map(|i| {
                let mut t = toks("w x1 x2 x3 x4 x5 x6 x7 x8 x9");
                t[1] = format!("u{i}");
                (format!("CWE-{i}"), t)
            })
            .collect();
        let stats =
            CorpusStats::from_documents(docs.iter().map(|(id, t)| (id.as_str(), t.as_slice())));
        let v = compute_tfidf("w", "CWE-0", &stats).unwrap();
        assert!((v + 0.001_072_386_539_177_306_6).abs() < 1e-12, "{v}");
    }

    fn table(entries: &[(&str, &[f64])]) -> WordVectorTable {
        let mut t = WordVectorTable::new(entries[0].1.len()).unwrap();
        for (w, v) in entries {
            t.insert(*w, v.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn sentence_vector_examples() {
        let t = table(&[("u", &[1.0, 2.0]), ("v", &[3.0, -2.0])]);
        let w: BTreeMap<String, f64> = [("u".to_string(), 0.5)].into();
        let (sv, covered) = sentence_vector(&toks("u"), &w, &t, "s");
        assert!(covered);
        assert_eq!(sv.values, vec![1.0, 2.0]);

        let w: BTreeMap<String, f64> = [("u".to_string(), 0.3), ("v".to_string(), 0.3)].into();
        let (sv, _) = sentence_vector(&toks("u v"), &w, &t, "s");
        assert_eq!(sv.values, vec![2.0, 0.0]);

        let (sv, covered) = sentence_vector(&toks("nothing here"), &w, &t, "s");
        assert!(!covered);
        assert_eq!(sv.values, vec![0.0, 0.0]);
    }

    #[test]
    fn cosine_examples() {
        let v = SentenceVector {
            values: vec![1.0, 2.0, -3.0],
            source_id: "v".into(),
        };
        let neg = SentenceVector {
            values: vec![-1.0, -2.0, 3.0],
            source_id: "n".into(),
        };
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine(&v, &neg).unwrap() + 1.0).abs() < 1e-15);
        let e1 = SentenceVector {
            values: vec![1.0, 0.0],
            source_id: "a".into(),
        };
        let e2 = SentenceVector {
            values: vec![0.0, 1.0],
            source_id: "b".into(),
        };
        assert_eq!(cosine(&e1, &e2).unwrap(), 0.0);
        assert_eq!(cosine(&e1, &SentenceVector::zeros(2, "z")).unwrap(), 0.0);
        assert!(matches!(
            cosine(&e1, &v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exchange_file_parsing() {
        let f =
            ExchangeFile::parse("WVEC1 dim=4\n# model_revision abc\nCWE-1\t1.0,2.5,-3e-7,0.1\n")
                .unwrap();
        assert_eq!(f.dimension, 4);
        assert_eq!(f.comments, vec!["model_revision abc"]);
        assert_eq!(f.records[0].1, vec![1.0, 2.5, -3e-7, 0.1]);
        assert_eq!(ExchangeFile::parse(&f.render()).unwrap(), f);

        let short = ExchangeFile::parse("WVEC1 dim=4\nx\t1,2,3\n");
        assert!(matches!(
            short,
            Err(Error::ExchangeMalformed { line: 2, .. })
        ));
        let dup = ExchangeFile::parse("WVEC1 dim=1\nx\t1\nx\t2\n");
        assert!(matches!(dup, Err(Error::ExchangeMalformed { line: 3, .. })));
        assert!(ExchangeFile::parse("WVEC2 dim=1\n").is_err());
        assert!(ExchangeFile::parse("WVEC1 dim=1\nx\tNaN\n").is_err());

        let p = ExchangeProvider::from_exchange("m2", f);
        assert_eq!(p.dimension(), 4);
        let err = p
            .embed(TextRef::Message {
                id: "missing",
                text: "",
            })
            .unwrap_err();
        assert!(matches!(err, Error::UnknownTextId { .. }));
    }
}
