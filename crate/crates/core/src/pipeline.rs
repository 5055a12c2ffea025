//! Two-stage matching pipeline: stage 1, collective-region annotation,
//! stage 2 on the remainder, statistics, and burst-id back-annotation.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::matchset::{MatchSet, MatchStats, Pattern, Stage};
use crate::model::{BurstRef, ExecutionDataset, MpiClass};
use crate::stage1::stage1_match;
use crate::stage2::{define_regions, group_unmatched, stage2_match, RegionMap, SimilarityWeights};

#[derive(Debug, Clone)]
pub struct MatchOptions {
    pub weights: SimilarityWeights,
    pub parallel: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            weights: SimilarityWeights::default(),
            parallel: true,
        }
    }
}

/// Runs both matching stages. Region ids and burst ids are annotated onto
/// the datasets as a side effect.
pub fn match_executions(
    executions: &mut [ExecutionDataset],
    opts: &MatchOptions,
) -> Result<MatchSet> {
    opts.weights.validate()?;
    let stage1 = stage1_match(executions, opts.parallel)?;

    let mut regions: BTreeMap<String, RegionMap> = BTreeMap::new();
    for e in executions.iter_mut() {
        let map = define_regions(e);
        regions.insert(e.exec_id.clone(), map);
    }
    warn_on_region_disagreement(&regions);

    let groups2 = group_unmatched(executions, &stage1.unmatched);
    let stage2 = stage2_match(executions, &regions, &groups2, &opts.weights);

    let mut groups = stage1.groups;
    groups.extend(stage2.groups);

    let mut unmatched: BTreeMap<String, Vec<BurstRef>> = BTreeMap::new();
    for (exec, refs) in &stage1.unmatched {
        let remaining: Vec<BurstRef> = refs
            .iter()
            .copied()
            .filter(|r| !stage2.matched.contains(&(exec.clone(), *r)))
            .collect();
        unmatched.insert(exec.clone(), remaining);
    }

    // Back-annotate burst ids onto the datasets.
    for g in &groups {
        for (exec, r) in &g.members {
            if let Some(e) = executions.iter_mut().find(|e| &e.exec_id == exec) {
                if let Some(b) = e.burst_mut(*r) {
                    b.burst_id = Some(g.burst_id.clone());
                }
            }
        }
    }

    let stats = compute_stats(executions, &groups, &unmatched);
    Ok(MatchSet {
        executions: executions.iter().map(|e| e.exec_id.clone()).collect(),
        groups,
        unmatched,
        stats: Some(stats),
    })
}

fn warn_on_region_disagreement(regions: &BTreeMap<String, RegionMap>) {
    let mut per_rank: BTreeMap<u32, Vec<(&str, usize)>> = BTreeMap::new();
    for (exec, map) in regions {
        for (&rank, list) in map {
            per_rank
                .entry(rank)
                .or_default()
                .push((exec.as_str(), list.len()));
        }
    }
    for (rank, counts) in per_rank {
        let first = counts[0].1;
        if counts.iter().any(|&(_, c)| c != first) {
            let detail: Vec<String> = counts.iter().map(|(e, c)| format!("{e}={c}")).collect();
            log::warn!(
                "rank {rank}: executions disagree on collective region count ({}); ordinal region alignment may shift",
                detail.join(", ")
            );
        }
    }
}

fn compute_stats(
    executions: &[ExecutionDataset],
    groups: &[crate::matchset::MatchGroup],
    unmatched: &BTreeMap<String, Vec<BurstRef>>,
) -> MatchStats {
    let mut stats = MatchStats::default();
    for e in executions {
        let total = e.total_bursts();
        let un = unmatched.get(&e.exec_id).map_or(0, |v| v.len());
        let matched = total - un;
        stats.total_bursts.insert(e.exec_id.clone(), total);
        stats.matched_bursts.insert(e.exec_id.clone(), matched);
        stats.matched_pct.insert(
            e.exec_id.clone(),
            if total > 0 {
                100.0 * matched as f64 / total as f64
            } else {
                0.0
            },
        );
    }
    for g in groups {
        match g.stage {
            Stage::Direct => stats.direct_groups += 1,
            Stage::Pattern => stats.pattern_groups += 1,
            Stage::Structural => stats.structural_groups += 1,
            Stage::Truth => {}
        }
    }
    for e in executions {
        for r in unmatched.get(&e.exec_id).into_iter().flatten() {
            if let Some(b) = e.burst(*r) {
                *stats
                    .unmatched_patterns
                    .entry(Pattern::of(b).canonical())
                    .or_insert(0) += 1;
            }
        }
    }
    stats
}

/// Collective boundary count per rank, used by tests and diagnostics.
pub fn collective_counts(dataset: &ExecutionDataset) -> BTreeMap<u32, usize> {
    dataset
        .ranks
        .iter()
        .map(|(&r, bursts)| {
            (
                r,
                bursts
                    .iter()
                    .filter(|b| b.before.call.class == MpiClass::Collective)
                    .count(),
            )
        })
        .collect()
}
