//! Cross-execution burst correspondences: match groups, the match-set JSON
//! document, and recovery statistics against a ground truth.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Burst, BurstRef, ExecutionDataset};

/// Matching stage that produced a group. `Truth` only appears in ground
/// truth files written by the synthetic generator, never in match sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Direct,
    Pattern,
    Structural,
    Truth,
}

/// A cross-execution correspondence: one burst per execution believed to be
/// the same logical computation. All members share one rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchGroup {
    pub burst_id: String,
    pub stage: Stage,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<f64>,
    /// exec_id -> burst reference.
    pub members: BTreeMap<String, BurstRef>,
}

/// The (MPI before, MPI after) pair surrounding a compute burst.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    pub before: String,
    pub after: String,
}

impl Pattern {
    pub fn of(burst: &Burst) -> Self {
        Pattern {
            before: burst.before.call.name.to_ascii_uppercase(),
            after: burst.after.call.name.to_ascii_uppercase(),
        }
    }

    /// Canonical form used in burst ids and grouping keys, upper-case with
    /// the boundary marker rendered as NONE: `"BEFORE→AFTER"`.
    pub fn canonical(&self) -> String {
        let name = |s: &str| {
            if s.is_empty() {
                "NONE".to_string()
            } else {
                s.to_string()
            }
        };
        format!("{}→{}", name(&self.before), name(&self.after))
    }
}

/// Per-stage match statistics, included in the match-set document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchStats {
    pub total_bursts: BTreeMap<String, usize>,
    pub matched_bursts: BTreeMap<String, usize>,
    pub matched_pct: BTreeMap<String, f64>,
    pub direct_groups: usize,
    pub pattern_groups: usize,
    pub structural_groups: usize,
    /// Residual unmatched (before, after) patterns and how many bursts they
    /// cover across all executions.
    pub unmatched_patterns: BTreeMap<String, usize>,
}

/// The match-set document: executions, groups, and per-execution unmatched
/// burst references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub executions: Vec<String>,
    pub groups: Vec<MatchGroup>,
    pub unmatched: BTreeMap<String, Vec<BurstRef>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stats: Option<MatchStats>,
}

impl MatchSet {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("match set serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Groups whose members span every execution of this match set.
    pub fn complete_groups(&self) -> impl Iterator<Item = &MatchGroup> {
        let n = self.executions.len();
        self.groups.iter().filter(move |g| g.members.len() == n)
    }

    pub fn matched_count(&self, exec_id: &str) -> usize {
        self.groups
            .iter()
            .filter(|g| g.members.contains_key(exec_id))
            .count()
    }

    /// Checks the partition property: every burst of every execution appears
    /// in exactly one group or exactly once in `unmatched`.
    pub fn check_partition(&self, executions: &[ExecutionDataset]) -> Result<()> {
        for exec in executions {
            let mut seen: BTreeMap<BurstRef, usize> = BTreeMap::new();
            for g in &self.groups {
                if let Some(r) = g.members.get(&exec.exec_id) {
                    *seen.entry(*r).or_insert(0) += 1;
                }
            }
            for r in self.unmatched.get(&exec.exec_id).into_iter().flatten() {
                *seen.entry(*r).or_insert(0) += 1;
            }
            for (rank, bursts) in &exec.ranks {
                for (i, _) in bursts.iter().enumerate() {
                    let r = BurstRef {
                        rank: *rank,
                        seq_index: i,
                    };
                    match seen.get(&r) {
                        Some(1) => {}
                        Some(n) => {
                            return Err(crate::Error::Invalid(format!(
                                "burst {r:?} of {} covered {n} times",
                                exec.exec_id
                            )))
                        }
                        None => {
                            return Err(crate::Error::Invalid(format!(
                                "burst {r:?} of {} not covered",
                                exec.exec_id
                            )))
                        }
                    }
                }
            }
            let covered: usize = seen.values().sum();
            let total = exec.total_bursts();
            if covered != total {
                return Err(crate::Error::Invalid(format!(
                    "{}: covered {covered} references vs {total} bursts",
                    exec.exec_id
                )));
            }
        }
        Ok(())
    }
}

/// Pairwise recovery of `predicted` against `truth`: the fraction of
/// same-group burst pairs in the truth that are also grouped together in the
/// prediction. 1.0 when the truth contains no pairs.
pub fn pairwise_recovery(truth: &[MatchGroup], predicted: &[MatchGroup]) -> f64 {
    let mut assignment: HashMap<(&str, BurstRef), usize> = HashMap::new();
    for (gi, g) in predicted.iter().enumerate() {
        for (exec, r) in &g.members {
            assignment.insert((exec.as_str(), *r), gi);
        }
    }
    let mut total = 0u64;
    let mut recovered = 0u64;
    for g in truth {
        let members: Vec<(&str, BurstRef)> =
            g.members.iter().map(|(e, r)| (e.as_str(), *r)).collect();
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                total += 1;
                let a = assignment.get(&members[i]);
                let b = assignment.get(&members[j]);
                if let (Some(ga), Some(gb)) = (a, b) {
                    if ga == gb {
                        recovered += 1;
                    }
                }
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        recovered as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(id: &str, stage: Stage, members: &[(&str, u32, usize)]) -> MatchGroup {
        MatchGroup {
            burst_id: id.into(),
            stage,
            score: None,
            members: members
                .iter()
                .map(|(e, r, s)| {
                    (
                        e.to_string(),
                        BurstRef {
                            rank: *r,
                            seq_index: *s,
                        },
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn canonical_pattern_renders_boundary_as_none() {
        let p = Pattern {
            before: String::new(),
            after: "MPI_BCAST".into(),
        };
        assert_eq!(p.canonical(), "NONE→MPI_BCAST");
    }

    #[test]
    fn json_round_trip() {
        let set = MatchSet {
            executions: vec!["run1".into(), "run2".into()],
            groups: vec![group(
                "r0_d_1",
                Stage::Direct,
                &[("run1", 0, 0), ("run2", 0, 0)],
            )],
            unmatched: [("run1".to_string(), vec![]), ("run2".to_string(), vec![])].into(),
            stats: None,
        };
        let text = set.to_json();
        let back = MatchSet::from_json(&text).unwrap();
        assert_eq!(back, set);
        assert!(!text.contains("score"));
        assert!(!text.contains("stats"));
    }

    #[test]
    fn recovery_counts_pairs() {
        let truth = vec![
            group(
                "gt1",
                Stage::Truth,
                &[("run1", 0, 0), ("run2", 0, 0), ("run3", 0, 0)],
            ),
            group("gt2", Stage::Truth, &[("run1", 0, 1), ("run2", 0, 1)]),
        ];
        // Prediction recovers gt1 fully, misses gt2.
        let predicted = vec![group(
            "p1",
            Stage::Direct,
            &[("run1", 0, 0), ("run2", 0, 0), ("run3", 0, 0)],
        )];
        let r = pairwise_recovery(&truth, &predicted);
        assert!((r - 3.0 / 4.0).abs() < 1e-12);
        assert_eq!(pairwise_recovery(&[], &predicted), 1.0);
    }
}
