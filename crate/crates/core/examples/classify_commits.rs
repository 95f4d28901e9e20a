//! Scores commit messages against the CWE catalog with several embedding
//! providers and resolves the category by majority vote.
//!
//!     cargo run --example classify_commits

use weaknessminer::cwe_catalog::{default_stopwords, Catalog};
use weaknessminer::semvec::{CorpusStats, EmbeddingProvider, TfIdfProvider, WordVectorTable};
use weaknessminer::wfc::{classify_all, ScoringContext};

/// Deterministic pseudo-embedding so the example needs no model files.
fn hashed(word: &str, seed: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let h = word.bytes().fold(
                1469598103934665603u64 ^ seed ^ ((i as u64) << 32),
                |h, b| (h ^ b as u64).wrapping_mul(1099511628211),
            );
            (h % 2000) as f64 / 1000.0 - 1.0
        })
        .collect()
}

fn main() -> weaknessminer::Result<()> {
    let catalog = Catalog::builtin();
    let stopwords = default_stopwords();
    let commits: Vec<(String, String, String)> = [
        ("c1", "fix memory buffer release in pointer handling"),
        ("c2", "resolve sql injection in data query"),
        ("c3", "patch readme wording"),
    ]
    .iter()
    .map(|(h, m)| ("demo".to_string(), h.to_string(), m.to_string()))
    .collect();

    // Only catalog words get vectors, so a message sharing none of them
    // embeds to zero and fails the positivity gate.
    let mut vocab: Vec<String> = catalog
        .categories()
        .iter()
        .flat_map(|c| c.tokens.clone())
        .collect();
    vocab.sort();
    vocab.dedup();
    let dim = 16;
    let mut providers: Vec<Box<dyn EmbeddingProvider>> = Vec::new();
    for seed in 0..5u64 {
        let mut table = WordVectorTable::new(dim)?;
        for w in &vocab {
            table.insert(w.clone(), hashed(w, seed, dim))?;
        }
        let stats = CorpusStats::from_catalog(&catalog);
        providers.push(Box::new(TfIdfProvider::new(
            format!("m{seed}"),
            &catalog,
            stats,
            table,
            stopwords.clone(),
        )?));
    }

    let ctx = ScoringContext::new(&catalog, &providers)?;
    for k in [1, 3, 5] {
        println!("k = {k}");
        for a in classify_all(&ctx, &commits, k)? {
            println!(
                "  {} {:?} votes={:?} gate={}",
                a.commit_hash, a.decision, a.votes, a.gate_passed
            );
        }
    }
    Ok(())
}
