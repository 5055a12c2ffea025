//! Stage 2 of burst matching: collective-region segmentation, grouping of
//! the bursts stage 1 left unmatched by (pattern, region) structure keys,
//! and greedy multi-criteria similarity matching within each group.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::matchset::{MatchGroup, Pattern, Stage};
use crate::model::{Burst, BurstRef, CollectiveRegion, ExecutionDataset, MpiClass};

/// Weights of the similarity score `S = w_t*D_temporal + w_s*D_size +
/// w_p*D_partner` and the acceptance cutoff (a pair is matched only when
/// `S < threshold`).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimilarityWeights {
    pub temporal: f64,
    pub size: f64,
    pub partner: f64,
    pub threshold: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights {
            temporal: 0.6,
            size: 0.2,
            partner: 0.2,
            threshold: 0.3,
        }
    }
}

impl SimilarityWeights {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(self.temporal)
            && in_unit(self.size)
            && in_unit(self.partner)
            && in_unit(self.threshold))
        {
            return Err(Error::Config(
                "similarity weights must lie in [0, 1]".into(),
            ));
        }
        let sum = self.temporal + self.size + self.partner;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "similarity weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Per-rank collective regions of one execution.
pub type RegionMap = BTreeMap<u32, Vec<CollectiveRegion>>;

/// Splits each rank's timeline at the end of every collective call (the
/// begin time of the burst that follows it) and annotates each burst with
/// its region ordinal: the number of boundaries at or before its begin time.
/// Region 0 precedes the first collective.
pub fn define_regions(dataset: &mut ExecutionDataset) -> RegionMap {
    let mut map = RegionMap::new();
    for (&rank, bursts) in dataset.ranks.iter_mut() {
        if bursts.is_empty() {
            continue;
        }
        let mut boundaries: Vec<u64> = bursts
            .iter()
            .filter(|b| b.before.call.class == MpiClass::Collective)
            .map(|b| b.begin_time)
            .collect();
        boundaries.dedup();
        let span_start = bursts.first().expect("non-empty").begin_time;
        let span_end = bursts.last().expect("non-empty").end_time;
        let mut regions = Vec::with_capacity(boundaries.len() + 1);
        let mut start = span_start;
        for (i, &b) in boundaries.iter().enumerate() {
            regions.push(CollectiveRegion {
                t_start: start,
                t_end: b,
                region_id: i as u32,
            });
            start = b;
        }
        regions.push(CollectiveRegion {
            t_start: start,
            t_end: span_end.max(start),
            region_id: boundaries.len() as u32,
        });
        for b in bursts.iter_mut() {
            let id = boundaries.partition_point(|&t| t <= b.begin_time) as u32;
            b.region_id = Some(id);
        }
        map.insert(rank, regions);
    }
    map
}

/// Relative position of the burst midpoint within its region, clamped to
/// [0, 1]. Zero-duration regions pin the position to 0.
fn position(burst: &Burst, region: &CollectiveRegion) -> f64 {
    if region.t_end <= region.t_start {
        return 0.0;
    }
    let span = (region.t_end - region.t_start) as f64;
    let pos = (burst.midpoint() - region.t_start as f64) / span;
    pos.clamp(0.0, 1.0)
}

/// `|pos(ref) - pos(cand)|` of the midpoints within their own regions.
pub fn temporal_distance(
    reference: &Burst,
    candidate: &Burst,
    ref_region: &CollectiveRegion,
    cand_region: &CollectiveRegion,
) -> f64 {
    (position(reference, ref_region) - position(candidate, cand_region)).abs()
}

fn size_component(a: Option<u64>, b: Option<u64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => {
            let denom = x.max(y).max(1) as f64;
            Some((x.abs_diff(y)) as f64 / denom)
        }
        _ => None,
    }
}

/// Mean of `|size_ref - size_cand| / max(size_ref, size_cand, 1)` over the
/// before/after sides where both sizes are present; 0 when neither is.
pub fn size_distance(reference: &Burst, candidate: &Burst) -> f64 {
    let components: Vec<f64> = [
        size_component(reference.before.size, candidate.before.size),
        size_component(reference.after.size, candidate.after.size),
    ]
    .into_iter()
    .flatten()
    .collect();
    if components.is_empty() {
        0.0
    } else {
        components.iter().sum::<f64>() / components.len() as f64
    }
}

fn partner_component(a: Option<u32>, b: Option<u32>) -> f64 {
    match (a, b) {
        (Some(x), Some(y)) if x != y => 1.0,
        _ => 0.0,
    }
}

/// Mean over the before/after sides of the partner mismatch indicator:
/// 1 when both partners are present and differ, 0 otherwise.
pub fn partner_distance(reference: &Burst, candidate: &Burst) -> f64 {
    (partner_component(reference.before.partner, candidate.before.partner)
        + partner_component(reference.after.partner, candidate.after.partner))
        / 2.0
}

pub fn similarity_score(
    reference: &Burst,
    candidate: &Burst,
    ref_region: &CollectiveRegion,
    cand_region: &CollectiveRegion,
    weights: &SimilarityWeights,
) -> f64 {
    weights.temporal * temporal_distance(reference, candidate, ref_region, cand_region)
        + weights.size * size_distance(reference, candidate)
        + weights.partner * partner_distance(reference, candidate)
}

/// Grouping key of stage 2: (rank, (before, after) pattern, region ordinal).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StructureKey {
    pub rank: u32,
    pub pattern: Pattern,
    pub region_id: u32,
}

pub type StructureGroups = BTreeMap<StructureKey, BTreeMap<String, Vec<BurstRef>>>;

/// Groups unmatched bursts by structure key. Groups present in fewer than
/// two executions are filtered out; member lists are in begin-time order.
pub fn group_unmatched(
    executions: &[ExecutionDataset],
    unmatched: &BTreeMap<String, Vec<BurstRef>>,
) -> StructureGroups {
    let mut groups: StructureGroups = BTreeMap::new();
    for exec in executions {
        for &r in unmatched.get(&exec.exec_id).into_iter().flatten() {
            let burst = exec.burst(r).expect("unmatched ref resolves");
            let key = StructureKey {
                rank: r.rank,
                pattern: Pattern::of(burst),
                region_id: burst.region_id.expect("regions annotated before grouping"),
            };
            groups
                .entry(key)
                .or_default()
                .entry(exec.exec_id.clone())
                .or_default()
                .push(r);
        }
    }
    // Bursts are stored per rank in begin-time order, so sorting by the
    // (rank, seq) reference keeps member lists temporal.
    for members in groups.values_mut() {
        for refs in members.values_mut() {
            refs.sort();
        }
    }
    groups.retain(|_, members| members.len() >= 2);
    groups
}

#[derive(Debug, Clone, Default)]
pub struct Stage2Outcome {
    pub groups: Vec<MatchGroup>,
    /// Every reference consumed by an accepted tuple.
    pub matched: BTreeSet<(String, BurstRef)>,
}

fn region_of<'a>(
    regions: &'a BTreeMap<String, RegionMap>,
    exec: &str,
    rank: u32,
    region_id: u32,
) -> &'a CollectiveRegion {
    &regions[exec][&rank][region_id as usize]
}

/// Greedy similarity matching within each structure group. The execution
/// with the most members is the reference side; references are processed in
/// begin-time order and take, from every other execution, the unused
/// candidate with minimal score, accepted only below the threshold.
pub fn stage2_match(
    executions: &[ExecutionDataset],
    regions: &BTreeMap<String, RegionMap>,
    groups: &StructureGroups,
    weights: &SimilarityWeights,
) -> Stage2Outcome {
    let by_id: BTreeMap<&str, &ExecutionDataset> =
        executions.iter().map(|e| (e.exec_id.as_str(), e)).collect();
    let mut out = Stage2Outcome::default();

    for (key, members) in groups {
        let ref_exec: &str = members
            .iter()
            .max_by(|(ea, va), (eb, vb)| {
                (va.len(), std::cmp::Reverse(ea.as_str()))
                    .cmp(&(vb.len(), std::cmp::Reverse(eb.as_str())))
            })
            .map(|(e, _)| e.as_str())
            .expect("group has members");

        let mut used: BTreeMap<&str, Vec<bool>> = members
            .iter()
            .map(|(e, refs)| (e.as_str(), vec![false; refs.len()]))
            .collect();

        let canon = key.pattern.canonical();
        let mut j = 0usize;
        for &reference in &members[ref_exec] {
            let ref_burst = by_id[ref_exec].burst(reference).expect("ref resolves");
            let ref_region = region_of(regions, ref_exec, key.rank, key.region_id);
            let mut tuple: Vec<(&str, BurstRef, f64)> = Vec::new();
            for (exec, refs) in members.iter() {
                if exec.as_str() == ref_exec {
                    continue;
                }
                let cand_region = region_of(regions, exec, key.rank, key.region_id);
                let mut best: Option<(f64, u64, usize, usize)> = None; // (S, begin, seq, idx)
                for (idx, &r) in refs.iter().enumerate() {
                    if used[exec.as_str()][idx] {
                        continue;
                    }
                    let cand = by_id[exec.as_str()].burst(r).expect("candidate resolves");
                    let s = similarity_score(ref_burst, cand, ref_region, cand_region, weights);
                    let entry = (s, cand.begin_time, r.seq_index, idx);
                    if best.is_none_or(|b| (entry.0, entry.1, entry.2) < (b.0, b.1, b.2)) {
                        best = Some(entry);
                    }
                }
                if let Some((s, _, _, idx)) = best {
                    if s < weights.threshold {
                        used.get_mut(exec.as_str()).expect("exec present")[idx] = true;
                        tuple.push((exec.as_str(), members[exec][idx], s));
                    }
                }
            }
            if !tuple.is_empty() {
                j += 1;
                let score = tuple.iter().map(|(_, _, s)| *s).fold(0.0f64, f64::max);
                let mut group_members: BTreeMap<String, BurstRef> =
                    tuple.iter().map(|(e, r, _)| (e.to_string(), *r)).collect();
                group_members.insert(ref_exec.to_string(), reference);
                out.matched.insert((ref_exec.to_string(), reference));
                for (e, r, _) in &tuple {
                    out.matched.insert((e.to_string(), *r));
                }
                out.groups.push(MatchGroup {
                    burst_id: format!("r{}_s_{}_reg{}_{}", key.rank, canon, key.region_id, j),
                    stage: Stage::Structural,
                    score: Some(score),
                    members: group_members,
                });
            }
        }
    }
    out
}
