//! Shared builders for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use burstfuse::model::{Burst, CallClassifier, CommContext, ExecutionDataset};

/// A dataset with one rank whose bursts carry the given (before, after)
/// call-name pairs at regular times.
pub fn patterned_dataset(
    exec: &str,
    rank_patterns: &[(u32, Vec<(&str, &str)>)],
) -> ExecutionDataset {
    let classifier = CallClassifier::default();
    let mut d = ExecutionDataset::new(exec, "TEST");
    for (rank, pairs) in rank_patterns {
        let bursts: Vec<Burst> = pairs
            .iter()
            .enumerate()
            .map(|(i, (before, after))| {
                let mut b = Burst::new(
                    *rank,
                    i as u64 * 100,
                    i as u64 * 100 + 60,
                    CommContext::bare(classifier.call(before, false)),
                    CommContext::bare(classifier.call(after, false)),
                );
                b.seq_index = i;
                b.rel_position = (i + 1) as f64 / pairs.len() as f64;
                b
            })
            .collect();
        d.ranks.insert(*rank, bursts);
    }
    d
}

/// Renames an execution (exec ids must differ across a suite).
pub fn renamed(mut d: ExecutionDataset, exec: &str) -> ExecutionDataset {
    d.exec_id = exec.to_string();
    d
}

/// Per-rank counter sums, for conservation checks.
pub fn counter_sums(d: &ExecutionDataset) -> BTreeMap<(u32, String), u64> {
    let mut sums = BTreeMap::new();
    for (&rank, bursts) in &d.ranks {
        for b in bursts {
            for (name, v) in &b.counters {
                *sums.entry((rank, name.clone())).or_insert(0) += v;
            }
        }
    }
    sums
}
