//! Core burst-level domain model shared by every pipeline stage.
//!
//! A *compute burst* is the region between two MPI calls of one rank. Each
//! burst carries the hardware-counter deltas accumulated over that region,
//! the MPI context on both sides, and a handful of derived features
//! (relative position, IPC, burst frequency, concurrency).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Classification of an MPI call with respect to the matching heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MpiClass {
    PointToPoint,
    Collective,
    Other,
    /// Synthetic marker for the trace start/end, where no real MPI call
    /// delimits the burst.
    Boundary,
}

/// A canonical MPI call label plus its class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpiCall {
    pub name: String,
    pub class: MpiClass,
}

impl MpiCall {
    /// The trace start/end marker. Its name is empty and it is the only
    /// call with class [`MpiClass::Boundary`].
    pub fn boundary() -> Self {
        MpiCall {
            name: String::new(),
            class: MpiClass::Boundary,
        }
    }

    pub fn is_boundary(&self) -> bool {
        self.class == MpiClass::Boundary
    }
}

/// Decides the class of an MPI call from its (canonical, upper-case) name.
///
/// A call is collective when its name contains one of the configured base
/// names, so `MPI_ALLGATHERV` and `MPI_IBCAST` land in the collective set
/// alongside `MPI_GATHER` and `MPI_BCAST`. Point-to-point classification is
/// not name-driven: a call becomes point-to-point exactly when a
/// communication record resolves a partner for it (see `prv_ingest`), which
/// keeps the `partner present => class point-to-point` invariant structural.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallClassifier {
    /// Base collective names without the `MPI_` prefix, upper-case.
    collective_bases: Vec<String>,
}

pub const DEFAULT_COLLECTIVES: &[&str] = &[
    "MPI_BARRIER",
    "MPI_BCAST",
    "MPI_ALLREDUCE",
    "MPI_GATHER",
    "MPI_SCATTER",
];

impl Default for CallClassifier {
    fn default() -> Self {
        CallClassifier::new(DEFAULT_COLLECTIVES.iter().map(|s| s.to_string()))
    }
}

impl CallClassifier {
    pub fn new(collective_names: impl IntoIterator<Item = String>) -> Self {
        let collective_bases = collective_names
            .into_iter()
            .map(|n| {
                let up = n.trim().to_ascii_uppercase();
                up.strip_prefix("MPI_").unwrap_or(&up).to_string()
            })
            .filter(|b| !b.is_empty())
            .collect();
        CallClassifier { collective_bases }
    }

    pub fn is_collective(&self, name: &str) -> bool {
        let up = name.trim().to_ascii_uppercase();
        let suffix = up.strip_prefix("MPI_").unwrap_or(&up);
        self.collective_bases
            .iter()
            .any(|b| suffix.contains(b.as_str()))
    }

    /// Classify a call name, taking into account whether a communication
    /// partner was resolved for it.
    pub fn classify(&self, name: &str, has_partner: bool) -> MpiClass {
        if name.is_empty() {
            MpiClass::Boundary
        } else if self.is_collective(name) {
            MpiClass::Collective
        } else if has_partner {
            MpiClass::PointToPoint
        } else {
            MpiClass::Other
        }
    }

    pub fn call(&self, name: &str, has_partner: bool) -> MpiCall {
        MpiCall {
            class: self.classify(name, has_partner),
            name: name.to_string(),
        }
    }
}

/// The MPI call adjacent to a compute burst, with the communication partner
/// and message size when the call is point-to-point and a matching
/// communication record exists. `size: None` is distinct from `size: Some(0)`
/// everywhere: absent means "not measured", zero means "measured zero bytes".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommContext {
    pub call: MpiCall,
    pub partner: Option<u32>,
    pub size: Option<u64>,
}

impl CommContext {
    pub fn boundary() -> Self {
        CommContext {
            call: MpiCall::boundary(),
            partner: None,
            size: None,
        }
    }

    pub fn bare(call: MpiCall) -> Self {
        CommContext {
            call,
            partner: None,
            size: None,
        }
    }
}

/// One computation interval of one MPI rank. Times are in nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    /// 0-based MPI rank.
    pub task_id: u32,
    pub begin_time: u64,
    pub end_time: u64,
    pub duration: u64,
    /// Counter name -> accumulated value. A missing key means the counter
    /// was not measured for this burst, never zero.
    pub counters: BTreeMap<String, u64>,
    pub before: CommContext,
    pub after: CommContext,
    /// Ordinal of this compute burst within its rank, 0-based.
    pub seq_index: usize,
    /// (seq_index + 1) / rank burst count, in (0, 1].
    pub rel_position: f64,
    pub ipc: Option<f64>,
    /// Bursts per second over the rank's wall-clock span; constant per rank.
    pub frequency: Option<f64>,
    /// Time-weighted average number of simultaneously computing ranks.
    pub concurrency: Option<f64>,
    /// Collective region ordinal, assigned by the stage-2 matcher.
    pub region_id: Option<u32>,
    /// Match label, assigned by the matching stages.
    pub burst_id: Option<String>,
}

impl Burst {
    /// A burst with the temporal and contextual fields set and every derived
    /// field still empty.
    pub fn new(
        task_id: u32,
        begin_time: u64,
        end_time: u64,
        before: CommContext,
        after: CommContext,
    ) -> Self {
        debug_assert!(end_time >= begin_time);
        Burst {
            task_id,
            begin_time,
            end_time,
            duration: end_time - begin_time,
            counters: BTreeMap::new(),
            before,
            after,
            seq_index: 0,
            rel_position: 0.0,
            ipc: None,
            frequency: None,
            concurrency: None,
            region_id: None,
            burst_id: None,
        }
    }

    pub fn midpoint(&self) -> f64 {
        (self.begin_time as f64 + self.end_time as f64) / 2.0
    }
}

/// Reference to one burst inside an execution: (rank, ordinal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BurstRef {
    pub rank: u32,
    pub seq_index: usize,
}

/// All compute bursts of one instrumented run, grouped per rank, plus the
/// counter-set metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionDataset {
    pub exec_id: String,
    /// Label of the hardware-counter set this run was instrumented with
    /// (e.g. "INS_MIX").
    pub counter_set_name: String,
    /// Rank -> bursts ordered by begin time.
    pub ranks: BTreeMap<u32, Vec<Burst>>,
    /// Ordered counter column names; every burst's counter keys are a subset.
    pub counter_names: Vec<String>,
}

impl ExecutionDataset {
    pub fn new(exec_id: impl Into<String>, counter_set_name: impl Into<String>) -> Self {
        ExecutionDataset {
            exec_id: exec_id.into(),
            counter_set_name: counter_set_name.into(),
            ranks: BTreeMap::new(),
            counter_names: Vec::new(),
        }
    }

    pub fn rank_count(&self) -> usize {
        self.ranks.len()
    }

    pub fn total_bursts(&self) -> usize {
        self.ranks.values().map(|b| b.len()).sum()
    }

    pub fn bursts(&self) -> impl Iterator<Item = &Burst> {
        self.ranks.values().flatten()
    }

    pub fn burst(&self, r: BurstRef) -> Option<&Burst> {
        self.ranks.get(&r.rank).and_then(|v| v.get(r.seq_index))
    }

    pub fn burst_mut(&mut self, r: BurstRef) -> Option<&mut Burst> {
        self.ranks
            .get_mut(&r.rank)
            .and_then(|v| v.get_mut(r.seq_index))
    }

    /// Checks the structural invariants: per-rank ordering, seq_index
    /// consistency, duration arithmetic, and counter-name containment.
    pub fn validate(&self) -> crate::Result<()> {
        for (rank, bursts) in &self.ranks {
            let mut prev_end = 0u64;
            for (i, b) in bursts.iter().enumerate() {
                if b.task_id != *rank {
                    return Err(crate::Error::Invalid(format!(
                        "burst {i} of rank {rank} carries task_id {}",
                        b.task_id
                    )));
                }
                if b.seq_index != i {
                    return Err(crate::Error::Invalid(format!(
                        "burst {i} of rank {rank} carries seq_index {}",
                        b.seq_index
                    )));
                }
                if b.end_time < b.begin_time || b.duration != b.end_time - b.begin_time {
                    return Err(crate::Error::Invalid(format!(
                        "burst {i} of rank {rank} has inconsistent times"
                    )));
                }
                if i > 0 && b.begin_time < prev_end {
                    return Err(crate::Error::Invalid(format!(
                        "bursts of rank {rank} overlap at index {i}"
                    )));
                }
                prev_end = b.end_time;
                for key in b.counters.keys() {
                    if !self.counter_names.iter().any(|n| n == key) {
                        return Err(crate::Error::Invalid(format!(
                            "counter {key} of rank {rank} not declared in counter_names"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Temporal interval between consecutive collectives of one rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectiveRegion {
    pub t_start: u64,
    pub t_end: u64,
    pub region_id: u32,
}

/// Configuration for the derived-feature pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConfig {
    /// Counter holding the instruction count (IPC numerator).
    pub instructions_counter: String,
    /// Counter holding the cycle count (IPC denominator).
    pub cycles_counter: String,
    /// Rank -> compute node. When absent, all ranks are treated as sharing
    /// one node for the concurrency metric.
    pub node_map: Option<BTreeMap<u32, u32>>,
}

impl Default for DerivedConfig {
    fn default() -> Self {
        DerivedConfig {
            instructions_counter: "PAPI_TOT_INS".to_string(),
            cycles_counter: "PAPI_TOT_CYC".to_string(),
            node_map: None,
        }
    }
}

/// Computes rel_position, ipc, frequency and concurrency for every burst.
///
/// Missing counters yield absent derived fields, never a failure. The pass
/// is idempotent and preserves input order.
pub fn compute_derived_features(
    dataset: &ExecutionDataset,
    config: &DerivedConfig,
) -> ExecutionDataset {
    let mut out = dataset.clone();
    let ranks: Vec<u32> = out.ranks.keys().copied().collect();
    for rank in ranks {
        let (count, span, first_begin) = {
            let bursts = &out.ranks[&rank];
            let count = bursts.len();
            let first = bursts.first().map(|b| b.begin_time).unwrap_or(0);
            let last = bursts.last().map(|b| b.end_time).unwrap_or(0);
            (count, last.saturating_sub(first), first)
        };
        let _ = first_begin;
        let frequency = if span > 0 {
            Some(count as f64 * 1e9 / span as f64)
        } else {
            None
        };
        let concurrencies: Vec<f64> = out.ranks[&rank]
            .iter()
            .map(|b| concurrency_of(b, dataset, config.node_map.as_ref()))
            .collect();
        let bursts = out.ranks.get_mut(&rank).expect("rank present");
        for (i, b) in bursts.iter_mut().enumerate() {
            b.rel_position = (i + 1) as f64 / count as f64;
            b.ipc = match (
                b.counters.get(&config.instructions_counter),
                b.counters.get(&config.cycles_counter),
            ) {
                (Some(&ins), Some(&cyc)) if cyc > 0 => Some(ins as f64 / cyc as f64),
                _ => None,
            };
            b.frequency = frequency;
            b.concurrency = Some(concurrencies[i]);
        }
    }
    out
}

/// Time-weighted average, over the burst's interval, of the number of ranks
/// inside a compute burst, the subject rank included. With a node map, only
/// ranks on the subject's node are counted. Zero-duration bursts yield 1.
pub fn concurrency_of(
    burst: &Burst,
    all_ranks: &ExecutionDataset,
    node_map: Option<&BTreeMap<u32, u32>>,
) -> f64 {
    if burst.duration == 0 {
        return 1.0;
    }
    let same_node = |other: u32| -> bool {
        match node_map {
            None => true,
            Some(map) => match (map.get(&burst.task_id), map.get(&other)) {
                (Some(a), Some(b)) => a == b,
                // Unmapped ranks count as their own node.
                _ => other == burst.task_id,
            },
        }
    };
    let mut active_ns = burst.duration as f64; // the subject itself
    for (&rank, bursts) in &all_ranks.ranks {
        if rank == burst.task_id || !same_node(rank) {
            continue;
        }
        // Bursts are ordered and disjoint; scan the window overlapping ours.
        let start = bursts.partition_point(|b| b.end_time <= burst.begin_time);
        for other in &bursts[start..] {
            if other.begin_time >= burst.end_time {
                break;
            }
            let lo = other.begin_time.max(burst.begin_time);
            let hi = other.end_time.min(burst.end_time);
            if hi > lo {
                active_ns += (hi - lo) as f64;
            }
        }
    }
    active_ns / burst.duration as f64
}
