//! Sizes and draws a manual-verification sample, then measures agreement
//! between two reviewers.
//!
//!     cargo run --example review_sampling

use weaknessminer::analytics::{cochran_sample_size, cohen_kappa, sample_for_review};

fn main() -> weaknessminer::Result<()> {
    for conf in [0.90, 0.95, 0.99] {
        println!(
            "confidence {conf}: n(inf)={} n(1681)={}",
            cochran_sample_size(None, conf, 0.05)?,
            cochran_sample_size(Some(1681), conf, 0.05)?
        );
    }

    let ids: Vec<String> = (0..1681).map(|i| format!("proj:{i:06}")).collect();
    let sample = sample_for_review(&ids, 0.95, 0.05, 42)?;
    println!("drew {} ids, first {:?}", sample.len(), &sample[..3]);

    let a = [
        "fix", "fix", "not", "fix", "not", "fix", "fix", "not", "fix", "fix",
    ];
    let b = [
        "fix", "fix", "not", "not", "not", "fix", "fix", "not", "fix", "fix",
    ];
    println!("kappa = {:.3}", cohen_kappa(&a, &b)?);
    Ok(())
}
