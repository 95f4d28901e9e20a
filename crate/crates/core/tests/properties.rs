mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use weaknessminer::analytics::{cochran_sample_size, cohen_kappa, five_number, sample_indices};
use weaknessminer::ingest::CommitRecord;
use weaknessminer::semvec::{cosine, SentenceVector};
use weaknessminer::szz::WccChain;
use weaknessminer::weakness::{self, deduplicate, merge_weaknesses, ExpDenominator};
use weaknessminer::wfc::{vote, Decision, ModelScore, WfcAssignment};

const DAY: i64 = 86_400;
const POOL: [&str; 6] = ["aaaa", "bbbb", "cccc", "dddd", "eeee", "ffff"];

type Item = (WfcAssignment, Option<WccChain>, i64);

/// Up to ten fixes over two projects, each blaming a random subset of a
/// shared pool of six contributing commits (empty subset = untraced).
fn items() -> impl Strategy<Value = Vec<Item>> {
    prop::collection::vec((0usize..2, 0u8..64, 0i64..40, 0usize..3), 1..10).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (p, mask, offset, cwe))| {
                let project = ["p", "q"][p];
                let hash = format!("{i:02}{:010x}", i * 7919);
                let at = (60 + offset) * DAY + i as i64;
                let wccs: Vec<(&str, i64)> = POOL
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(k, h)| (*h, (k as i64 * 9) * DAY))
                    .collect();
                let c = (!wccs.is_empty()).then(|| common::chain(project, &hash, at, &wccs));
                let cwe = ["CWE-1219", "CWE-355", "CWE-1228"][cwe];
                (common::assignment(project, &hash, cwe), c, at)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn dedup_conserves_fixes(items in items()) {
        let ws = deduplicate(&items);
        let fixes: Vec<String> = ws.iter().flat_map(|w| w.fixes.iter().map(|f| f.hash.clone())).collect();
        let distinct: BTreeSet<&String> = fixes.iter().collect();
        prop_assert_eq!(fixes.len(), items.len());
        prop_assert_eq!(distinct.len(), items.len());
        let ids: BTreeSet<&str> = ws.iter().map(|w| w.id.as_str()).collect();
        prop_assert_eq!(ids.len(), ws.len());
    }

    #[test]
    fn dedup_is_idempotent_and_order_free(items in items(), seed in any::<u64>()) {
        let ws = deduplicate(&items);
        prop_assert_eq!(&merge_weaknesses(ws.clone()), &ws);
        let mut shuffled = items.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.rotate_left(i as u32) as usize) % (i + 1));
        }
        prop_assert_eq!(&deduplicate(&shuffled), &ws);
    }

    #[test]
    fn merged_fixes_share_origin(items in items()) {
        for w in deduplicate(&items).iter().filter(|w| w.fixes.len() > 1) {
            let origins: BTreeSet<&str> = w.fixes.iter().map(|f| {
                let (_, c, _) = items.iter().find(|(a, _, _)| a.commit_hash == f.hash).unwrap();
                c.as_ref().unwrap().earliest().unwrap().hash.as_str()
            }).collect();
            prop_assert_eq!(origins.len(), 1);
        }
    }

    #[test]
    fn lifecycle_points_are_ordered(items in items()) {
        for w in deduplicate(&items) {
            let win = weakness::lifecycle(&w);
            prop_assert!(w.t2 <= w.t3);
            if let (Some(t0), Some(t1)) = (w.t0, w.t1) {
                prop_assert!(t0 <= t1 && t1 <= w.t2);
                let (t12, t13) = (win.latency_days.unwrap(), win.lifetime_days.unwrap());
                prop_assert!((t13 - (t12 + win.fixing_days)).abs() < 1e-9);
            } else {
                prop_assert!(win.insertion_days.is_none() && win.lifetime_days.is_none());
            }
            if w.fixes.len() == 1 {
                prop_assert_eq!(win.fixing_days, 0.0);
            }
        }
    }

    #[test]
    fn vote_respects_threshold(tops in prop::collection::vec(0usize..4, 1..=5), k in 1usize..=5) {
        let k = k.min(tops.len());
        let scores: Vec<ModelScore> = tops.iter().enumerate().map(|(i, t)| {
            let sims = (0..4).map(|c| (format!("CWE-{c}"), if c == *t { 0.9 } else { 0.1 })).collect();
            ModelScore::from_similarities(&format!("m{i}"), sims)
        }).collect();
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for t in &tops {
            *counts.entry(*t).or_default() += 1;
        }
        let best = counts.values().copied().max().unwrap();
        match vote(&scores, k).unwrap() {
            Decision::Assigned(c) => {
                let n = counts[&c.trim_start_matches("CWE-").parse::<usize>().unwrap()];
                prop_assert_eq!(n, best);
                prop_assert!(n >= k);
                if k > 1 {
                    prop_assert_eq!(vote(&scores, k - 1).unwrap(), Decision::Assigned(c));
                }
            }
            Decision::NeedsReview => prop_assert!(best < k),
            Decision::Rejected => prop_assert!(false, "vote never rejects"),
        }
        let mut reversed = scores.clone();
        reversed.reverse();
        prop_assert_eq!(vote(&reversed, k).unwrap(), vote(&scores, k).unwrap());
    }

    #[test]
    fn cosine_is_bounded_and_symmetric(
        pair in (1usize..8).prop_flat_map(|d| (prop::collection::vec(-1e3f64..1e3, d), prop::collection::vec(-1e3f64..1e3, d)))
    ) {
        let u = SentenceVector { values: pair.0, source_id: "u".into() };
        let v = SentenceVector { values: pair.1, source_id: "v".into() };
        let a = cosine(&u, &v).unwrap();
        prop_assert!((-1.0..=1.0).contains(&a));
        prop_assert_eq!(a, cosine(&v, &u).unwrap());
    }

    #[test]
    fn cochran_is_bounded_and_monotone(n in 1usize..100_000, conf in prop::sample::select(vec![0.90, 0.95, 0.99]), margin in 0.01f64..0.2) {
        let s = cochran_sample_size(Some(n), conf, margin).unwrap();
        let s_next = cochran_sample_size(Some(n + 1), conf, margin).unwrap();
        let inf = cochran_sample_size(None, conf, margin).unwrap();
        prop_assert!(s >= 1 && s <= n);
        prop_assert!(s <= s_next && s_next <= inf);
    }

    #[test]
    fn sample_indices_are_distinct_and_reproducible(pop in 0usize..500, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let size = (pop as f64 * frac) as usize;
        let s = sample_indices(pop, size, seed).unwrap();
        prop_assert_eq!(s.len(), size);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.iter().all(|&i| i < pop));
        prop_assert_eq!(s, sample_indices(pop, size, seed).unwrap());
        prop_assert!(sample_indices(pop, pop + 1, seed).is_err());
    }

    #[test]
    fn kappa_is_symmetric_and_at_most_one(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..200)) {
        let (a, b): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let k = cohen_kappa(&a, &b).unwrap();
        prop_assert!(k <= 1.0 + 1e-12);
        prop_assert!((k - cohen_kappa(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn five_number_is_ordered(values in prop::collection::vec(-1e6f64..1e6, 1..100)) {
        let f = five_number(&values).unwrap();
        prop_assert!(f.min <= f.q1 && f.q1 <= f.median && f.median <= f.q3 && f.q3 <= f.max);
        prop_assert!(f.min <= f.mean + 1e-6 && f.mean <= f.max + 1e-6);
        prop_assert_eq!(f.n, values.len());
    }

    #[test]
    fn workload_and_experience_are_shares(
        raw in prop::collection::vec((0usize..4, 0i64..200, 0u64..50), 1..60),
        probe in 0usize..60,
        offset in 0i64..40,
    ) {
        let mut history: Vec<CommitRecord> = raw.iter().enumerate().map(|(i, (a, d, lines))| CommitRecord {
            hash: format!("{i:040x}"),
            author_id: format!("dev{a}"),
            authored_at: d * DAY,
            message: String::new(),
            parents: vec![],
            changes: if *lines == 0 { vec![] } else {
                vec![weaknessminer::ingest::FileChange {
                    path: "f".into(), old_path: None,
                    change_type: weaknessminer::ingest::ChangeType::Modified,
                    binary: false, lines_added: *lines, lines_deleted: 0, hunks: vec![],
                }]
            },
        }).collect();
        history.sort_by_key(|c| c.authored_at);
        let c = &history[probe % history.len()];
        let at = c.authored_at + offset * DAY;
        let wl = weakness::workload(&c.author_id, at, &history);
        prop_assert!((0.0..=1.0).contains(&wl.wl_commit) && (0.0..=1.0).contains(&wl.wl_code));
        if offset == 0 {
            prop_assert!(wl.wl_commit > 0.0);
        }
        for mode in [ExpDenominator::Sum, ExpDenominator::Max] {
            let e = weakness::experience(&c.author_id, at, &history, mode).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
        }
        prop_assert!(weakness::experience("nobody", at, &history, ExpDenominator::Sum).is_err());
    }
}
