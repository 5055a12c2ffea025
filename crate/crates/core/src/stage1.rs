//! Stage 1 of burst matching: direct positional matching when every
//! execution shows the same burst count and MPI pattern sequence for a rank,
//! pattern-frequency matching otherwise. Each rank is decided independently.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matchset::{MatchGroup, Pattern, Stage};
use crate::model::{BurstRef, ExecutionDataset};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stage1Outcome {
    pub groups: Vec<MatchGroup>,
    /// exec_id -> unmatched burst references, (rank, seq) ordered.
    pub unmatched: BTreeMap<String, Vec<BurstRef>>,
}

/// Validates the executions share the same rank ids and none is empty.
pub fn check_executions(executions: &[ExecutionDataset]) -> Result<()> {
    if executions.len() < 2 {
        return Err(Error::Config(format!(
            "matching needs at least 2 executions, got {}",
            executions.len()
        )));
    }
    for e in executions {
        if e.total_bursts() == 0 {
            return Err(Error::EmptyExecution(e.exec_id.clone()));
        }
    }
    let first: Vec<u32> = executions[0].ranks.keys().copied().collect();
    for e in &executions[1..] {
        let ranks: Vec<u32> = e.ranks.keys().copied().collect();
        if ranks != first {
            return Err(Error::RankMismatch(format!(
                "{} has {} ranks, {} has {}",
                executions[0].exec_id,
                first.len(),
                e.exec_id,
                ranks.len()
            )));
        }
    }
    Ok(())
}

struct RankOutcome {
    groups: Vec<MatchGroup>,
    unmatched: Vec<(String, BurstRef)>,
}

fn match_rank(executions: &[ExecutionDataset], rank: u32) -> RankOutcome {
    let sequences: Vec<Vec<Pattern>> = executions
        .iter()
        .map(|e| e.ranks[&rank].iter().map(Pattern::of).collect())
        .collect();
    let counts: Vec<usize> = sequences.iter().map(|s| s.len()).collect();
    let identical =
        counts.iter().all(|&c| c == counts[0]) && sequences.iter().all(|s| *s == sequences[0]);

    let mut out = RankOutcome {
        groups: Vec::new(),
        unmatched: Vec::new(),
    };

    if identical {
        for j in 1..=counts[0] {
            let members = executions
                .iter()
                .map(|e| {
                    (
                        e.exec_id.clone(),
                        BurstRef {
                            rank,
                            seq_index: j - 1,
                        },
                    )
                })
                .collect();
            out.groups.push(MatchGroup {
                burst_id: format!("r{rank}_d_{j}"),
                stage: Stage::Direct,
                score: None,
                members,
            });
        }
        return out;
    }

    // Pattern mode: occurrences per pattern per execution, in temporal
    // order. Only patterns with one common frequency across all executions
    // are kept.
    let occurrences: Vec<BTreeMap<&Pattern, Vec<usize>>> = sequences
        .iter()
        .map(|seq| {
            let mut map: BTreeMap<&Pattern, Vec<usize>> = BTreeMap::new();
            for (i, p) in seq.iter().enumerate() {
                map.entry(p).or_default().push(i);
            }
            map
        })
        .collect();

    let mut all_patterns: Vec<&Pattern> =
        occurrences.iter().flat_map(|m| m.keys().copied()).collect();
    all_patterns.sort();
    all_patterns.dedup();

    for pattern in all_patterns {
        let freqs: Vec<usize> = occurrences
            .iter()
            .map(|m| m.get(pattern).map_or(0, |v| v.len()))
            .collect();
        let kept = freqs.iter().all(|&f| f == freqs[0]) && freqs[0] > 0;
        if kept {
            let canon = pattern.canonical();
            for j in 1..=freqs[0] {
                let members = executions
                    .iter()
                    .zip(&occurrences)
                    .map(|(e, occ)| {
                        (
                            e.exec_id.clone(),
                            BurstRef {
                                rank,
                                seq_index: occ[pattern][j - 1],
                            },
                        )
                    })
                    .collect();
                out.groups.push(MatchGroup {
                    burst_id: format!("r{rank}_p_{canon}_{j}"),
                    stage: Stage::Pattern,
                    score: None,
                    members,
                });
            }
        } else {
            for (e, occ) in executions.iter().zip(&occurrences) {
                for &seq_index in occ.get(pattern).into_iter().flatten() {
                    out.unmatched
                        .push((e.exec_id.clone(), BurstRef { rank, seq_index }));
                }
            }
        }
    }
    out
}

/// Runs stage 1 over every rank. With `parallel`, ranks are processed on the
/// rayon pool; results are merged in rank order either way, so the output is
/// identical.
pub fn stage1_match(executions: &[ExecutionDataset], parallel: bool) -> Result<Stage1Outcome> {
    check_executions(executions)?;
    let ranks: Vec<u32> = executions[0].ranks.keys().copied().collect();
    let per_rank: Vec<RankOutcome> = if parallel {
        ranks
            .par_iter()
            .map(|&r| match_rank(executions, r))
            .collect()
    } else {
        ranks.iter().map(|&r| match_rank(executions, r)).collect()
    };

    let mut outcome = Stage1Outcome::default();
    for e in executions {
        outcome.unmatched.insert(e.exec_id.clone(), Vec::new());
    }
    for rank_out in per_rank {
        outcome.groups.extend(rank_out.groups);
        for (exec, r) in rank_out.unmatched {
            outcome
                .unmatched
                .get_mut(&exec)
                .expect("exec known")
                .push(r);
        }
    }
    for refs in outcome.unmatched.values_mut() {
        refs.sort();
    }
    Ok(outcome)
}
