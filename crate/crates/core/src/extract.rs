//! Compute-burst extraction: turns the raw event stream of a parsed trace
//! into an [`ExecutionDataset`], attributing counters and MPI context.
//!
//! Per rank, MPI call intervals (entry event with value > 0, exit with
//! value 0) delimit the compute bursts. Counters carried on the MPI-entry
//! event that closes a compute burst belong to that burst; counters on exit
//! events belong to the communication burst and are dropped with a counted
//! warning. Partners and message sizes come from the communication record
//! whose send/recv endpoint falls inside the adjacent MPI interval.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::model::{
    compute_derived_features, Burst, CallClassifier, CommContext, DerivedConfig, ExecutionDataset,
};
use crate::pcf::PcfDictionary;
use crate::prv::ParsedTrace;

/// Event-type ids that mark MPI calls in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MpiTypeIds {
    pub p2p: u64,
    pub collective: u64,
    pub other: u64,
}

impl Default for MpiTypeIds {
    fn default() -> Self {
        MpiTypeIds {
            p2p: 50000001,
            collective: 50000002,
            other: 50000003,
        }
    }
}

impl MpiTypeIds {
    pub fn contains(&self, id: u64) -> bool {
        id == self.p2p || id == self.collective || id == self.other
    }
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub mpi_type_ids: MpiTypeIds,
    /// A pcf event type whose label starts with one of these prefixes is a
    /// hardware counter.
    pub counter_label_prefixes: Vec<String>,
    pub classifier: CallClassifier,
    pub derived: DerivedConfig,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            mpi_type_ids: MpiTypeIds::default(),
            counter_label_prefixes: vec!["PAPI_".to_string()],
            classifier: CallClassifier::default(),
            derived: DerivedConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractWarnings {
    /// MPI entries without an exit, truncated at trace end.
    pub truncated_intervals: u64,
    /// Counter events at a time that closes no compute burst.
    pub dropped_counter_events: u64,
    /// MPI entries arriving while another call was open.
    pub replaced_open_intervals: u64,
    /// MPI exits without a matching entry.
    pub orphan_exits: u64,
}

struct MpiInterval {
    begin: u64,
    end: u64,
    name: String,
    partner: Option<u32>,
    size: Option<u64>,
}

/// Extracts the per-rank compute bursts of one execution.
pub fn extract_bursts(
    trace: &ParsedTrace,
    pcf: &PcfDictionary,
    exec_id: &str,
    counter_set_name: &str,
    opts: &ExtractOptions,
) -> Result<(ExecutionDataset, ExtractWarnings)> {
    let counter_ids: BTreeMap<u64, String> = pcf
        .types_with_label_prefix(&opts.counter_label_prefixes)
        .into_iter()
        .collect();
    let total_time = trace.total_time();
    let rank_count = trace.rank_count();
    let mut warnings = ExtractWarnings::default();

    // Per-rank communication endpoints: (time, partner, size), time-sorted.
    let mut endpoints: BTreeMap<u32, Vec<(u64, u32, u64)>> = BTreeMap::new();
    for c in &trace.comms {
        endpoints
            .entry(c.sender_task)
            .or_default()
            .push((c.send_time, c.receiver_task, c.size));
        endpoints
            .entry(c.receiver_task)
            .or_default()
            .push((c.recv_time, c.sender_task, c.size));
    }
    for eps in endpoints.values_mut() {
        eps.sort_unstable_by_key(|&(t, p, _)| (t, p));
    }

    let mut dataset = ExecutionDataset::new(exec_id, counter_set_name);
    dataset.counter_names = counter_ids.values().cloned().collect();

    let empty = Vec::new();
    for rank in 0..rank_count {
        let events = trace.events.get(&rank).unwrap_or(&empty);

        let mut intervals: Vec<MpiInterval> = Vec::new();
        let mut counter_events: Vec<(u64, &str, u64)> = Vec::new();
        let mut open: Option<(u64, u64, u64)> = None; // (begin, type, value)

        for ev in events {
            for &(type_id, value) in &ev.entries {
                if opts.mpi_type_ids.contains(type_id) {
                    if value > 0 {
                        if let Some((begin, t, v)) = open.replace((ev.time, type_id, value)) {
                            warnings.replaced_open_intervals += 1;
                            intervals.push(make_interval(begin, ev.time, t, v, pcf));
                        }
                    } else {
                        match open.take() {
                            Some((begin, t, v)) => {
                                intervals.push(make_interval(begin, ev.time, t, v, pcf))
                            }
                            None => warnings.orphan_exits += 1,
                        }
                    }
                } else if let Some(name) = counter_ids.get(&type_id) {
                    counter_events.push((ev.time, name, value));
                }
            }
        }
        if let Some((begin, t, v)) = open.take() {
            warnings.truncated_intervals += 1;
            intervals.push(make_interval(begin, total_time.max(begin), t, v, pcf));
        }

        // Partner and size from the earliest endpoint inside the interval;
        // ties break toward the lower partner rank. Collectives never carry
        // partners.
        if let Some(eps) = endpoints.get(&rank) {
            for iv in &mut intervals {
                if opts.classifier.is_collective(&iv.name) {
                    continue;
                }
                let start = eps.partition_point(|&(t, _, _)| t < iv.begin);
                let mut best: Option<(u64, u32, u64)> = None;
                for &(t, p, s) in &eps[start..] {
                    if t > iv.end {
                        break;
                    }
                    if best.is_none_or(|(bt, bp, _)| (t, p) < (bt, bp)) {
                        best = Some((t, p, s));
                    }
                }
                if let Some((_, p, s)) = best {
                    iv.partner = Some(p);
                    iv.size = Some(s);
                }
            }
        }

        // Compute bursts between intervals; zero-length gaps are dropped.
        let mut bursts: Vec<Burst> = Vec::new();
        let mut prev_exit = 0u64;
        let mut prev_ctx = CommContext::boundary();
        for iv in &intervals {
            let ctx = CommContext {
                call: opts.classifier.call(&iv.name, iv.partner.is_some()),
                partner: iv.partner,
                size: iv.size,
            };
            if iv.begin > prev_exit {
                bursts.push(Burst::new(
                    rank,
                    prev_exit,
                    iv.begin,
                    prev_ctx.clone(),
                    ctx.clone(),
                ));
            }
            prev_exit = prev_exit.max(iv.end);
            prev_ctx = ctx;
        }
        if total_time > prev_exit {
            bursts.push(Burst::new(
                rank,
                prev_exit,
                total_time,
                prev_ctx,
                CommContext::boundary(),
            ));
        }

        // Counter attribution: a counter event belongs to the compute burst
        // ending exactly at its timestamp.
        let by_end: BTreeMap<u64, usize> = bursts
            .iter()
            .enumerate()
            .map(|(i, b)| (b.end_time, i))
            .collect();
        for (time, name, value) in counter_events {
            match by_end.get(&time) {
                Some(&idx) => {
                    *bursts[idx].counters.entry(name.to_string()).or_insert(0) += value;
                }
                None => warnings.dropped_counter_events += 1,
            }
        }

        for (i, b) in bursts.iter_mut().enumerate() {
            b.seq_index = i;
        }
        if !bursts.is_empty() {
            dataset.ranks.insert(rank, bursts);
        }
    }

    if warnings.dropped_counter_events > 0 {
        log::warn!(
            "dropped {} counter events outside any attribution point",
            warnings.dropped_counter_events
        );
    }
    if warnings.truncated_intervals > 0 {
        log::warn!(
            "truncated {} unmatched MPI entries at trace end",
            warnings.truncated_intervals
        );
    }

    let dataset = compute_derived_features(&dataset, &opts.derived);
    dataset.validate()?;
    Ok((dataset, warnings))
}

fn make_interval(
    begin: u64,
    end: u64,
    type_id: u64,
    value: u64,
    pcf: &PcfDictionary,
) -> MpiInterval {
    let name = pcf
        .value_label(type_id, value)
        .map(|l| l.to_ascii_uppercase())
        .unwrap_or_else(|| format!("MPI_T{type_id}_V{value}"));
    MpiInterval {
        begin,
        end,
        name,
        partner: None,
        size: None,
    }
}
