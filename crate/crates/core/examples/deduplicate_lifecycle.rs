//! Merges fixes whose blame chains nest into weaknesses and derives their
//! lifecycle windows.
//!
//!     cargo run --example deduplicate_lifecycle

use std::collections::BTreeMap;

use weaknessminer::szz::{Wcc, WccChain};
use weaknessminer::weakness::{deduplicate, lifecycle};
use weaknessminer::wfc::{Decision, WfcAssignment};

const DAY: i64 = 86_400;

fn fix(hash: &str, at_day: i64, wccs: &[(&str, i64)]) -> (WfcAssignment, Option<WccChain>, i64) {
    let assignment = WfcAssignment {
        project: "demo".into(),
        commit_hash: hash.into(),
        decision: Decision::Assigned("CWE-1219".into()),
        votes: BTreeMap::new(),
        scores: vec![],
        gate_passed: true,
        review_cause: None,
    };
    let chain = WccChain {
        project: "demo".into(),
        wfc_hash: hash.into(),
        wfc_authored_at: at_day * DAY,
        wccs: wccs
            .iter()
            .map(|(h, d)| Wcc {
                hash: h.to_string(),
                authored_at: d * DAY,
            })
            .collect(),
        traced: true,
        untraceable_reason: None,
        failures: vec![],
    };
    (assignment, Some(chain), at_day * DAY)
}

fn main() {
    // 79373 nests in cce8d and both start at c4ale, so they merge; 76142 also
    // nests in cce8d but starts at f8eld and stays separate.
    let items = vec![
        fix("79373000000000", 10, &[("c4ale", 1), ("9a1b2", 5)]),
        fix("76142000000000", 12, &[("f8eld", 3), ("9a1b2", 5)]),
        fix(
            "cce8d000000000",
            20,
            &[("c4ale", 1), ("f8eld", 3), ("9a1b2", 5)],
        ),
    ];
    for w in deduplicate(&items) {
        let win = lifecycle(&w);
        let fixes: Vec<&str> = w.fixes.iter().map(|f| &f.hash[..5]).collect();
        println!(
            "{} fixes={fixes:?} insertion={:?} latency={:?} fixing={} lifetime={:?} days",
            w.id, win.insertion_days, win.latency_days, win.fixing_days, win.lifetime_days
        );
    }
}
