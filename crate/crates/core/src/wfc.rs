//! Weakness-fixing commit classification: each provider ranks the catalog
//! categories by cosine similarity to the commit message, a positivity gate
//! decides whether the commit is a fix at all, and a k-of-n vote assigns the
//! category.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cwe_catalog::Catalog;
use crate::error::{Error, Result};
use crate::semvec::{cosine, EmbeddingProvider, SentenceVector, TextRef};

pub const DEFAULT_VOTE_K: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub provider_id: String,
    pub top_category: String,
    pub top_similarity: f64,
    pub all_similarities: BTreeMap<String, f64>,
}

impl ModelScore {
    /// Builds a score, picking the argmax with ties going to the
    /// lexicographically smallest id.
    pub fn from_similarities(provider_id: &str, all: BTreeMap<String, f64>) -> Self {
        let mut top: Option<(&String, f64)> = None;
        // BTreeMap iterates in ascending id order, so a strict comparison
        // keeps the smallest id on ties.
        for (id, &s) in &all {
            if top.is_none_or(|(_, best)| s > best) {
                top = Some((id, s));
            }
        }
        let (top_category, top_similarity) = top.map(|(id, s)| (id.clone(), s)).unwrap_or_default();
        ModelScore {
            provider_id: provider_id.to_string(),
            top_category,
            top_similarity,
            all_similarities: all,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "cwe_id", rename_all = "snake_case")]
pub enum Decision {
    Assigned(String),
    NeedsReview,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfcAssignment {
    pub project: String,
    pub commit_hash: String,
    pub decision: Decision,
    pub votes: BTreeMap<String, usize>,
    pub scores: Vec<ModelScore>,
    pub gate_passed: bool,
    /// Why the commit could not be scored, when it needs review for that reason.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review_cause: Option<String>,
}

impl WfcAssignment {
    pub fn assigned_cwe(&self) -> Option<&str> {
        match &self.decision {
            Decision::Assigned(c) => Some(c),
            _ => None,
        }
    }
}

/// Category vectors per provider, computed once and shared across commits.
pub struct ScoringContext<'a> {
    catalog: &'a Catalog,
    providers: &'a [Box<dyn EmbeddingProvider>],
    category_vectors: Vec<Vec<SentenceVector>>,
}

impl<'a> ScoringContext<'a> {
    pub fn new(catalog: &'a Catalog, providers: &'a [Box<dyn EmbeddingProvider>]) -> Result<Self> {
        if providers.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one provider is required".into(),
            ));
        }
        let category_vectors = providers
            .iter()
            .map(|p| {
                catalog
                    .categories()
                    .iter()
                    .map(|c| p.embed(TextRef::Category(c)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoringContext {
            catalog,
            providers,
            category_vectors,
        })
    }

    pub fn provider_count(&self) -> usize {
        self.providers.len()
    }

    /// One score per provider for a commit message.
    pub fn score_commit(&self, hash: &str, message: &str) -> Result<Vec<ModelScore>> {
        self.providers
            .iter()
            .zip(&self.category_vectors)
            .map(|(p, cats)| {
                let v = p.embed(TextRef::Message {
                    id: hash,
                    text: message,
                })?;
                let mut all = BTreeMap::new();
                for (cat, cv) in self.catalog.categories().iter().zip(cats) {
                    all.insert(cat.cwe_id.clone(), cosine(&v, cv)?);
                }
                Ok(ModelScore::from_similarities(p.provider_id(), all))
            })
            .collect()
    }
}

pub fn score_commit(
    hash: &str,
    message: &str,
    catalog: &Catalog,
    providers: &[Box<dyn EmbeddingProvider>],
) -> Result<Vec<ModelScore>> {
    ScoringContext::new(catalog, providers)?.score_commit(hash, message)
}

/// True iff some similarity from any provider is strictly positive.
pub fn gate_wfc(scores: &[ModelScore]) -> bool {
    scores
        .iter()
        .flat_map(|s| s.all_similarities.values())
        .any(|&x| x > 0.0)
}

pub fn tally(scores: &[ModelScore]) -> BTreeMap<String, usize> {
    let mut votes = BTreeMap::new();
    for s in scores {
        *votes.entry(s.top_category.clone()).or_insert(0) += 1;
    }
    votes
}

/// Assigns the category topping at least `threshold_k` providers. With a low
/// `k` several categories may qualify; the most-voted wins, then the smallest id.
pub fn vote(scores: &[ModelScore], threshold_k: usize) -> Result<Decision> {
    if threshold_k < 1 || threshold_k > scores.len() {
        return Err(Error::InvalidArgument(format!(
            "vote threshold {threshold_k} outside 1..={}",
            scores.len()
        )));
    }
    let votes = tally(scores);
    let winner = votes.iter().filter(|(_, &n)| n >= threshold_k).fold(
        None::<(&String, usize)>,
        |best, (c, &n)| match best {
            Some((_, bn)) if bn >= n => best,
            _ => Some((c, n)),
        },
    );
    Ok(match winner {
        Some((c, _)) => Decision::Assigned(c.clone()),
        None => Decision::NeedsReview,
    })
}

/// Full classification of one security commit.
pub fn classify(
    ctx: &ScoringContext<'_>,
    project: &str,
    hash: &str,
    message: &str,
    threshold_k: usize,
) -> Result<WfcAssignment> {
    let base = |decision, scores: Vec<ModelScore>, gate, cause| WfcAssignment {
        project: project.to_string(),
        commit_hash: hash.to_string(),
        decision,
        votes: tally(&scores),
        scores,
        gate_passed: gate,
        review_cause: cause,
    };
    let scores = match ctx.score_commit(hash, message) {
        Ok(s) => s,
        Err(e @ Error::UnknownTextId { .. }) => {
            return Ok(base(
                Decision::NeedsReview,
                vec![],
                false,
                Some(e.to_string()),
            ));
        }
        Err(e) => return Err(e),
    };
    if !gate_wfc(&scores) {
        return Ok(base(Decision::Rejected, scores, false, None));
    }
    let decision = vote(&scores, threshold_k)?;
    let cause = (decision == Decision::NeedsReview).then(|| "providers disagree".to_string());
    Ok(base(decision, scores, true, cause))
}

/// Classifies many commits in parallel, preserving input order.
pub fn classify_all(
    ctx: &ScoringContext<'_>,
    commits: &[(String, String, String)],
    threshold_k: usize,
) -> Result<Vec<WfcAssignment>> {
    if threshold_k < 1 || threshold_k > ctx.provider_count() {
        return Err(Error::InvalidArgument(format!(
            "vote threshold {threshold_k} outside 1..={}",
            ctx.provider_count()
        )));
    }
    commits
        .par_iter()
        .map(|(project, hash, message)| classify(ctx, project, hash, message, threshold_k))
        .collect()
}
