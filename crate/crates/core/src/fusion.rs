//! Trace fusion: base-trace selection, column merging of matched bursts
//! across executions, the fused CSV with its column manifest, and synthetic
//! `.prv` emission.
//!
//! Only groups matched in every execution become rows. Temporal columns come
//! from the base execution. A feature column shared by several executions is
//! kept once when its values agree on every row; divergent columns keep the
//! base copy unprefixed plus one `{exec_id}_`-prefixed copy per execution,
//! and columns measured by a single execution appear under that execution's
//! prefix (unprefixed for the base).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::emit::{allocate_counter_ids, CallTable};
use crate::error::{Error, Result};
use crate::extract::MpiTypeIds;
use crate::matchset::MatchSet;
use crate::model::{Burst, CallClassifier, ExecutionDataset, MpiClass};
use crate::pcf::{write_pcf, PcfDictionary, PcfEventType};
use crate::prv::{PrvHeader, PrvWriter};

/// Relative tolerance for float "equivalence"; integer counters must match
/// exactly.
pub const FLOAT_EQUIV_RTOL: f64 = 1e-9;

/// Returns the exec id minimizing unmatched bursts / total bursts; ties go
/// to the lexicographically smallest exec id.
pub fn select_base(executions: &[ExecutionDataset], match_set: &MatchSet) -> Result<String> {
    if executions.is_empty() {
        return Err(Error::EmptyInput("no executions".into()));
    }
    for exec in &match_set.executions {
        if !executions.iter().any(|e| &e.exec_id == exec) {
            return Err(Error::Config(format!(
                "match set references unknown execution {exec}"
            )));
        }
    }
    let mut best: Option<(f64, &str)> = None;
    for e in executions {
        let total = e.total_bursts().max(1);
        let un = match_set.unmatched.get(&e.exec_id).map_or(0, |v| v.len());
        let rate = un as f64 / total as f64;
        let better = match best {
            None => true,
            Some((r, id)) => rate < r || (rate == r && e.exec_id.as_str() < id),
        };
        if better {
            best = Some((rate, e.exec_id.as_str()));
        }
    }
    Ok(best.expect("non-empty").1.to_string())
}

/// One cell of the fused table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Absent,
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Absent => String::new(),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn equivalent(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Absent, Cell::Absent) => true,
            (Cell::Int(a), Cell::Int(b)) => a == b,
            (Cell::Text(a), Cell::Text(b)) => a == b,
            (Cell::Float(a), Cell::Float(b)) => {
                a == b || (a - b).abs() <= FLOAT_EQUIV_RTOL * a.abs().max(b.abs())
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeRule {
    /// Identity and timing columns carried from the base execution.
    Temporal,
    /// Values equivalent across executions; a single copy is kept.
    Identical,
    /// Values diverge; base copy unprefixed, per-execution prefixed copies.
    Divergent,
    /// Column measured by a single execution.
    Unique,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedColumn {
    pub output: String,
    pub source_exec: String,
    pub source_column: String,
    pub rule: MergeRule,
    #[serde(skip)]
    pub is_counter: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedRow {
    pub task_id: u32,
    pub seq_index: usize,
    pub begin_time: u64,
    pub end_time: u64,
    pub duration: u64,
    pub region_id: Option<u32>,
    pub burst_id: String,
    /// Base-trace MPI context, used for synthetic trace emission.
    pub before_name: String,
    pub after_name: String,
    /// Aligned with `FusedDataset::columns`.
    pub values: Vec<Cell>,
}

/// The merged table: base-trace temporal columns plus merged feature
/// columns, every one traceable through the column manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedDataset {
    pub base_exec: String,
    pub counter_set: String,
    /// Base execution first, then the rest in match-set order.
    pub executions: Vec<String>,
    pub columns: Vec<FusedColumn>,
    pub rows: Vec<FusedRow>,
    /// Groups spanning only a strict subset of the executions, excluded
    /// from the rows but reported for diagnostics.
    pub partial_group_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseOptions {
    /// Prefix applied to non-base copies; `{exec}` expands to the execution
    /// id. The default matches the `run2_PAPI_L1_DCM` naming scheme.
    pub prefix_scheme: String,
}

impl Default for FuseOptions {
    fn default() -> Self {
        FuseOptions {
            prefix_scheme: "{exec}_".to_string(),
        }
    }
}

impl FuseOptions {
    fn prefixed(&self, exec: &str, column: &str) -> String {
        format!("{}{}", self.prefix_scheme.replace("{exec}", exec), column)
    }
}

/// Feature columns every execution carries (beyond counters), in output
/// order.
const SHARED_FEATURES: &[&str] = &[
    "rel_position",
    "ipc",
    "frequency",
    "concurrency",
    "mpi_call_before",
    "mpi_call_after",
    "partner_before",
    "partner_after",
    "size_before",
    "size_after",
];

fn feature_cell(burst: &Burst, column: &str) -> Cell {
    let opt_f = |v: Option<f64>| v.map(Cell::Float).unwrap_or(Cell::Absent);
    let opt_u = |v: Option<u64>| v.map(Cell::Int).unwrap_or(Cell::Absent);
    match column {
        "rel_position" => Cell::Float(burst.rel_position),
        "ipc" => opt_f(burst.ipc),
        "frequency" => opt_f(burst.frequency),
        "concurrency" => opt_f(burst.concurrency),
        "mpi_call_before" => Cell::Text(burst.before.call.name.clone()),
        "mpi_call_after" => Cell::Text(burst.after.call.name.clone()),
        "partner_before" => opt_u(burst.before.partner.map(u64::from)),
        "partner_after" => opt_u(burst.after.partner.map(u64::from)),
        "size_before" => opt_u(burst.before.size),
        "size_after" => opt_u(burst.after.size),
        counter => opt_u(burst.counters.get(counter).copied()),
    }
}

pub fn fuse(
    executions: &[ExecutionDataset],
    match_set: &MatchSet,
    base: &str,
    opts: &FuseOptions,
) -> Result<FusedDataset> {
    let by_id: BTreeMap<&str, &ExecutionDataset> =
        executions.iter().map(|e| (e.exec_id.as_str(), e)).collect();
    if !by_id.contains_key(base) {
        return Err(Error::Config(format!("unknown base execution {base}")));
    }

    // Base first, then match-set order.
    let mut exec_order: Vec<String> = vec![base.to_string()];
    exec_order.extend(
        match_set
            .executions
            .iter()
            .filter(|e| e.as_str() != base)
            .cloned(),
    );

    let mut partial_group_ids = Vec::new();
    let mut complete = Vec::new();
    for g in &match_set.groups {
        if g.members.len() == match_set.executions.len() {
            complete.push(g);
        } else {
            partial_group_ids.push(g.burst_id.clone());
        }
    }

    // Resolve every member burst; order rows by the base burst.
    let mut rows_src: Vec<(&crate::matchset::MatchGroup, BTreeMap<&str, &Burst>)> = Vec::new();
    for g in complete {
        let mut members: BTreeMap<&str, &Burst> = BTreeMap::new();
        for (exec, r) in &g.members {
            let dataset = by_id
                .get(exec.as_str())
                .ok_or_else(|| Error::GroupIntegrity(g.burst_id.clone()))?;
            let burst = dataset
                .burst(*r)
                .ok_or_else(|| Error::GroupIntegrity(g.burst_id.clone()))?;
            members.insert(exec.as_str(), burst);
        }
        rows_src.push((g, members));
    }
    rows_src.sort_by_key(|(_, m)| {
        let b = m[base];
        (b.task_id, b.begin_time, b.seq_index)
    });

    // Counter union: base order first, then the others in execution order.
    let mut counter_union: Vec<String> = Vec::new();
    for exec in &exec_order {
        for name in &by_id[exec.as_str()].counter_names {
            if !counter_union.contains(name) {
                counter_union.push(name.clone());
            }
        }
    }

    let mut columns: Vec<FusedColumn> = Vec::new();
    let mut value_cols: Vec<Vec<Cell>> = Vec::new();

    let mut merge_feature = |name: &str, is_counter: bool| {
        let holders: Vec<&String> = exec_order
            .iter()
            .filter(|e| !is_counter || by_id[e.as_str()].counter_names.iter().any(|c| c == name))
            .collect();
        if holders.is_empty() {
            return;
        }
        let per_exec: BTreeMap<&str, Vec<Cell>> = holders
            .iter()
            .map(|e| {
                let cells: Vec<Cell> = rows_src
                    .iter()
                    .map(|(_, m)| feature_cell(m[e.as_str()], name))
                    .collect();
                (e.as_str(), cells)
            })
            .collect();
        if holders.len() == 1 {
            let exec = holders[0].as_str();
            let output = if exec == base {
                name.to_string()
            } else {
                opts.prefixed(exec, name)
            };
            columns.push(FusedColumn {
                output,
                source_exec: exec.to_string(),
                source_column: name.to_string(),
                rule: MergeRule::Unique,
                is_counter,
            });
            value_cols.push(per_exec[exec].clone());
            return;
        }
        let first = per_exec[holders[0].as_str()].clone();
        let equivalent = holders[1..].iter().all(|e| {
            per_exec[e.as_str()]
                .iter()
                .zip(&first)
                .all(|(a, b)| a.equivalent(b))
        });
        if equivalent {
            let source = if holders.iter().any(|e| e.as_str() == base) {
                base
            } else {
                holders[0].as_str()
            };
            columns.push(FusedColumn {
                output: name.to_string(),
                source_exec: source.to_string(),
                source_column: name.to_string(),
                rule: MergeRule::Identical,
                is_counter,
            });
            value_cols.push(per_exec[source].clone());
        } else {
            for e in &holders {
                let exec = e.as_str();
                let output = if exec == base {
                    name.to_string()
                } else {
                    opts.prefixed(exec, name)
                };
                columns.push(FusedColumn {
                    output,
                    source_exec: exec.to_string(),
                    source_column: name.to_string(),
                    rule: MergeRule::Divergent,
                    is_counter,
                });
                value_cols.push(per_exec[exec].clone());
            }
        }
    };

    for name in SHARED_FEATURES {
        merge_feature(name, false);
    }
    for name in &counter_union {
        merge_feature(name, true);
    }

    let rows: Vec<FusedRow> = rows_src
        .iter()
        .enumerate()
        .map(|(i, (g, m))| {
            let b = m[base];
            FusedRow {
                task_id: b.task_id,
                seq_index: b.seq_index,
                begin_time: b.begin_time,
                end_time: b.end_time,
                duration: b.duration,
                region_id: b.region_id,
                burst_id: g.burst_id.clone(),
                before_name: b.before.call.name.clone(),
                after_name: b.after.call.name.clone(),
                values: value_cols.iter().map(|col| col[i].clone()).collect(),
            }
        })
        .collect();

    let counter_set = exec_order
        .iter()
        .map(|e| by_id[e.as_str()].counter_set_name.as_str())
        .collect::<Vec<_>>()
        .join("+");

    Ok(FusedDataset {
        base_exec: base.to_string(),
        counter_set,
        executions: exec_order,
        columns,
        rows,
        partial_group_ids,
    })
}

const FUSED_HEAD: &[&str] = &[
    "exec_id",
    "counter_set",
    "task_id",
    "seq_index",
    "begin_time_ns",
    "end_time_ns",
    "duration_ns",
];

pub fn write_fused_csv(fused: &FusedDataset) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header: Vec<String> = FUSED_HEAD.iter().map(|s| s.to_string()).collect();
    let feature_cols: Vec<(usize, &FusedColumn)> = fused
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_counter)
        .collect();
    let counter_cols: Vec<(usize, &FusedColumn)> = fused
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_counter)
        .collect();
    header.extend(feature_cols.iter().map(|(_, c)| c.output.clone()));
    header.push("region_id".into());
    header.push("burst_id".into());
    header.extend(counter_cols.iter().map(|(_, c)| c.output.clone()));
    w.write_record(&header).expect("in-memory write");
    for row in &fused.rows {
        let mut rec: Vec<String> = vec![
            fused.base_exec.clone(),
            fused.counter_set.clone(),
            row.task_id.to_string(),
            row.seq_index.to_string(),
            row.begin_time.to_string(),
            row.end_time.to_string(),
            row.duration.to_string(),
        ];
        rec.extend(feature_cols.iter().map(|(i, _)| row.values[*i].render()));
        rec.push(row.region_id.map(|r| r.to_string()).unwrap_or_default());
        rec.push(row.burst_id.clone());
        rec.extend(counter_cols.iter().map(|(i, _)| row.values[*i].render()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    output: String,
    source_exec: String,
    source_column: String,
    rule: MergeRule,
}

/// The column manifest sidecar: one entry per output column, in CSV order.
pub fn write_column_manifest(fused: &FusedDataset) -> String {
    let mut entries: Vec<ManifestEntry> = Vec::new();
    let temporal = |output: &str| ManifestEntry {
        output: output.to_string(),
        source_exec: fused.base_exec.clone(),
        source_column: output.to_string(),
        rule: MergeRule::Temporal,
    };
    for head in FUSED_HEAD {
        entries.push(temporal(head));
    }
    for c in fused.columns.iter().filter(|c| !c.is_counter) {
        entries.push(ManifestEntry {
            output: c.output.clone(),
            source_exec: c.source_exec.clone(),
            source_column: c.source_column.clone(),
            rule: c.rule,
        });
    }
    entries.push(temporal("region_id"));
    entries.push(temporal("burst_id"));
    for c in fused.columns.iter().filter(|c| c.is_counter) {
        entries.push(ManifestEntry {
            output: c.output.clone(),
            source_exec: c.source_exec.clone(),
            source_column: c.source_column.clone(),
            rule: c.rule,
        });
    }
    let doc = serde_json::json!({
        "base_exec": fused.base_exec,
        "executions": fused.executions,
        "partial_groups": fused.partial_group_ids,
        "columns": entries,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("manifest serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone)]
pub struct EmitOptions {
    pub mpi_type_ids: MpiTypeIds,
    pub classifier: CallClassifier,
    /// First event-type id for counter columns absent from the base trace.
    pub new_type_base_id: u64,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            mpi_type_ids: MpiTypeIds::default(),
            classifier: CallClassifier::default(),
            new_type_base_id: 42001000,
        }
    }
}

/// Emits the fused dataset as a synthetic `.prv` plus its `.pcf`. One event
/// record per row at the base burst's end time carries every merged counter;
/// synthetic MPI delimiters reproduce the burst boundaries so the output
/// re-ingests through this crate's own parser and extractor.
pub fn emit_prv(
    fused: &FusedDataset,
    base_header: Option<&PrvHeader>,
    base_pcf: Option<&PcfDictionary>,
    opts: &EmitOptions,
) -> Result<(String, String)> {
    let counter_names: Vec<String> = fused
        .columns
        .iter()
        .filter(|c| c.is_counter)
        .map(|c| c.output.clone())
        .collect();
    let counter_ids = allocate_counter_ids(&counter_names, base_pcf, opts.new_type_base_id)?;
    let id_of: BTreeMap<&str, u64> = counter_ids
        .iter()
        .map(|(id, name)| (name.as_str(), *id))
        .collect();
    let counter_cells: Vec<(usize, &str)> = fused
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_counter)
        .map(|(i, c)| (i, c.output.as_str()))
        .collect();

    let mut calls = CallTable::new(opts.mpi_type_ids, base_pcf);
    let mut writer = PrvWriter::new();

    let max_end = fused.rows.iter().map(|r| r.end_time).max().unwrap_or(0);
    let ftime = base_header
        .and_then(|h| h.total_time)
        .unwrap_or(max_end)
        .max(max_end);
    let max_task = fused.rows.iter().map(|r| r.task_id + 1).max().unwrap_or(0);
    let ntasks = base_header
        .and_then(|h| h.ntasks)
        .unwrap_or(max_task)
        .max(max_task);

    let mut per_rank: BTreeMap<u32, Vec<&FusedRow>> = BTreeMap::new();
    for row in &fused.rows {
        per_rank.entry(row.task_id).or_default().push(row);
    }

    for (rank, rows) in &per_rank {
        // Leading delimiter when the first row does not start the trace.
        if let Some(first) = rows.first() {
            if first.begin_time > 0 {
                if first.before_name.is_empty() {
                    log::warn!(
                        "rank {rank}: first fused burst starts at {} with no leading call",
                        first.begin_time
                    );
                } else {
                    let (t, v) =
                        calls.entry_for(&first.before_name, &opts.classifier, MpiClass::Other);
                    writer.event(*rank, 0, &[(t, v)]);
                    writer.event(*rank, first.begin_time, &[(t, 0)]);
                }
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let next = rows.get(i + 1);
            // The event at the row's end carries the delimiter entry (when a
            // call follows) and every counter of the row.
            let mut entries: Vec<(u64, u64)> = Vec::new();
            let delimiter = match next {
                Some(n) => delimiter_calls(&row.after_name, &n.before_name, *rank),
                None => {
                    if row.after_name.is_empty() {
                        if row.end_time != ftime {
                            log::warn!(
                                "rank {rank}: final fused burst ends at {} but the trace spans {ftime}",
                                row.end_time
                            );
                        }
                        Delimiter::None
                    } else {
                        Delimiter::Single(row.after_name.clone())
                    }
                }
            };
            if let Delimiter::Single(name) | Delimiter::Split(name, _) = &delimiter {
                let (t, v) = calls.entry_for(name, &opts.classifier, MpiClass::Other);
                entries.push((t, v));
            }
            for (col, name) in &counter_cells {
                if let Cell::Int(v) = &row.values[*col] {
                    entries.push((id_of[name], *v));
                }
            }
            if !entries.is_empty() {
                writer.event(*rank, row.end_time, &entries);
            }
            // Close the delimiter (and open/close the second one when the
            // surrounding calls differ).
            let close_at = next.map(|n| n.begin_time).unwrap_or(ftime);
            match delimiter {
                Delimiter::None => {}
                Delimiter::Single(name) => {
                    let (t, _) = calls.entry_for(&name, &opts.classifier, MpiClass::Other);
                    writer.event(*rank, close_at, &[(t, 0)]);
                }
                Delimiter::Split(first, second) => {
                    let mid = row.end_time + (close_at - row.end_time) / 2;
                    let (t1, _) = calls.entry_for(&first, &opts.classifier, MpiClass::Other);
                    writer.event(*rank, mid, &[(t1, 0)]);
                    let (t2, v2) = calls.entry_for(&second, &opts.classifier, MpiClass::Other);
                    writer.event(*rank, mid, &[(t2, v2)]);
                    writer.event(*rank, close_at, &[(t2, 0)]);
                }
            }
        }
    }

    let mut pcf_types: Vec<PcfEventType> = calls.pcf_event_types();
    for (id, name) in &counter_ids {
        pcf_types.push(PcfEventType {
            gradient: 7,
            type_id: *id,
            label: name.clone(),
            values: vec![],
        });
    }
    let prv = writer.render(ftime, ntasks);
    let pcf = write_pcf(&pcf_types);
    Ok((prv, pcf))
}

enum Delimiter {
    None,
    Single(String),
    /// Two zero-gap calls: the first closes the left burst's context, the
    /// second opens the right burst's.
    Split(String, String),
}

fn delimiter_calls(after: &str, before: &str, rank: u32) -> Delimiter {
    match (after.is_empty(), before.is_empty()) {
        (true, true) => {
            log::warn!("rank {rank}: adjacent fused bursts carry no delimiting call");
            Delimiter::None
        }
        (true, false) => Delimiter::Single(before.to_string()),
        (false, true) => Delimiter::Single(after.to_string()),
        (false, false) if after == before => Delimiter::Single(after.to_string()),
        (false, false) => Delimiter::Split(after.to_string(), before.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matchset::{MatchGroup, Stage};
    use crate::model::{BurstRef, CommContext};

    fn burst(rank: u32, seq: usize, begin: u64, end: u64, counters: &[(&str, u64)]) -> Burst {
        let c = CallClassifier::default();
        let mut b = Burst::new(
            rank,
            begin,
            end,
            CommContext::bare(c.call(if seq == 0 { "" } else { "MPI_BCAST" }, false)),
            CommContext::bare(c.call("MPI_BCAST", false)),
        );
        b.seq_index = seq;
        for (k, v) in counters {
            b.counters.insert(k.to_string(), *v);
        }
        b.rel_position = (seq + 1) as f64 / 2.0;
        b
    }

    fn exec(id: &str, set: &str, counters: Vec<Vec<(&str, u64)>>) -> ExecutionDataset {
        let mut d = ExecutionDataset::new(id, set);
        let names: Vec<String> = counters
            .iter()
            .flatten()
            .map(|(k, _)| k.to_string())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        d.counter_names = names;
        let bursts: Vec<Burst> = counters
            .iter()
            .enumerate()
            .map(|(i, c)| burst(0, i, i as u64 * 200, i as u64 * 200 + 100, c))
            .collect();
        d.ranks.insert(0, bursts);
        d
    }

    fn full_match(execs: &[ExecutionDataset]) -> MatchSet {
        let n = execs[0].ranks[&0].len();
        let groups = (0..n)
            .map(|j| MatchGroup {
                burst_id: format!("r0_d_{}", j + 1),
                stage: Stage::Direct,
                score: None,
                members: execs
                    .iter()
                    .map(|e| {
                        (
                            e.exec_id.clone(),
                            BurstRef {
                                rank: 0,
                                seq_index: j,
                            },
                        )
                    })
                    .collect(),
            })
            .collect();
        MatchSet {
            executions: execs.iter().map(|e| e.exec_id.clone()).collect(),
            groups,
            unmatched: execs.iter().map(|e| (e.exec_id.clone(), vec![])).collect(),
            stats: None,
        }
    }

    #[test]
    fn base_selection_minimizes_unmatched_rate() {
        let execs = vec![
            exec("run1", "A", vec![vec![("C1", 1)], vec![("C1", 2)]]),
            exec("run2", "B", vec![vec![("C2", 1)], vec![("C2", 2)]]),
            exec("run3", "C", vec![vec![("C3", 1)], vec![("C3", 2)]]),
        ];
        let mut set = full_match(&execs);
        set.unmatched.insert(
            "run1".into(),
            vec![BurstRef {
                rank: 0,
                seq_index: 0,
            }],
        );
        set.unmatched.insert(
            "run3".into(),
            vec![
                BurstRef {
                    rank: 0,
                    seq_index: 0,
                },
                BurstRef {
                    rank: 0,
                    seq_index: 1,
                },
            ],
        );
        assert_eq!(select_base(&execs, &set).unwrap(), "run2");
        // All rates equal -> lexicographically smallest.
        let set = full_match(&execs);
        assert_eq!(select_base(&execs, &set).unwrap(), "run1");
    }

    #[test]
    fn identical_columns_collapse_to_one() {
        let execs = vec![
            exec(
                "run1",
                "A",
                vec![vec![("PAPI_TOT_INS", 10)], vec![("PAPI_TOT_INS", 20)]],
            ),
            exec(
                "run2",
                "B",
                vec![vec![("PAPI_TOT_INS", 10)], vec![("PAPI_TOT_INS", 20)]],
            ),
        ];
        let set = full_match(&execs);
        let fused = fuse(&execs, &set, "run1", &FuseOptions::default()).unwrap();
        let ins: Vec<&FusedColumn> = fused
            .columns
            .iter()
            .filter(|c| c.source_column == "PAPI_TOT_INS")
            .collect();
        assert_eq!(ins.len(), 1);
        assert_eq!(ins[0].output, "PAPI_TOT_INS");
        assert_eq!(ins[0].rule, MergeRule::Identical);
    }

    #[test]
    fn divergent_column_keeps_base_and_prefixed_copies() {
        let execs = vec![
            exec(
                "run1",
                "A",
                vec![vec![("PAPI_L1_DCM", 10)], vec![("PAPI_L1_DCM", 20)]],
            ),
            exec(
                "run2",
                "B",
                vec![vec![("PAPI_L1_DCM", 11)], vec![("PAPI_L1_DCM", 20)]],
            ),
        ];
        let set = full_match(&execs);
        let fused = fuse(&execs, &set, "run1", &FuseOptions::default()).unwrap();
        let cols: Vec<&str> = fused
            .columns
            .iter()
            .filter(|c| c.source_column == "PAPI_L1_DCM")
            .map(|c| c.output.as_str())
            .collect();
        assert_eq!(cols, vec!["PAPI_L1_DCM", "run2_PAPI_L1_DCM"]);
    }

    #[test]
    fn unique_column_gets_owner_prefix() {
        let execs = vec![
            exec(
                "run1",
                "A",
                vec![vec![("PAPI_TOT_INS", 10)], vec![("PAPI_TOT_INS", 20)]],
            ),
            exec(
                "run3",
                "C",
                vec![vec![("PAPI_VEC_SP", 5)], vec![("PAPI_VEC_SP", 6)]],
            ),
        ];
        let set = full_match(&execs);
        let fused = fuse(&execs, &set, "run1", &FuseOptions::default()).unwrap();
        assert!(fused
            .columns
            .iter()
            .any(|c| c.output == "run3_PAPI_VEC_SP" && c.rule == MergeRule::Unique));
        assert!(fused
            .columns
            .iter()
            .any(|c| c.output == "PAPI_TOT_INS" && c.rule == MergeRule::Unique));
    }

    #[test]
    fn rows_come_from_all_execution_groups_only() {
        let execs = vec![
            exec("run1", "A", vec![vec![("C", 1)], vec![("C", 2)]]),
            exec("run2", "B", vec![vec![("C", 1)], vec![("C", 2)]]),
        ];
        let mut set = full_match(&execs);
        set.groups[1].members.remove("run2");
        set.unmatched.get_mut("run1").unwrap().push(BurstRef {
            rank: 0,
            seq_index: 1,
        });
        set.unmatched.get_mut("run2").unwrap().push(BurstRef {
            rank: 0,
            seq_index: 1,
        });
        let fused = fuse(&execs, &set, "run1", &FuseOptions::default()).unwrap();
        assert_eq!(fused.rows.len(), 1);
        assert_eq!(fused.partial_group_ids, vec!["r0_d_2".to_string()]);
    }

    #[test]
    fn missing_member_burst_is_an_integrity_error() {
        let execs = vec![
            exec("run1", "A", vec![vec![("C", 1)]]),
            exec("run2", "B", vec![vec![("C", 1)]]),
        ];
        let mut set = full_match(&execs);
        set.groups[0].members.insert(
            "run2".into(),
            BurstRef {
                rank: 0,
                seq_index: 9,
            },
        );
        match fuse(&execs, &set, "run1", &FuseOptions::default()) {
            Err(Error::GroupIntegrity(id)) => assert_eq!(id, "r0_d_1"),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn fusion_is_deterministic_and_idempotent() {
        let execs = vec![
            exec("run1", "A", vec![vec![("C1", 1)], vec![("C1", 2)]]),
            exec("run2", "B", vec![vec![("C2", 3)], vec![("C2", 4)]]),
        ];
        let set = full_match(&execs);
        let a = fuse(&execs, &set, "run1", &FuseOptions::default()).unwrap();
        let b = fuse(&execs, &set, "run1", &FuseOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(write_fused_csv(&a), write_fused_csv(&b));
    }

    #[test]
    fn every_cell_traces_to_a_source_cell() {
        let execs = vec![
            exec(
                "run1",
                "A",
                vec![vec![("C1", 1), ("S", 7)], vec![("C1", 2), ("S", 9)]],
            ),
            exec(
                "run2",
                "B",
                vec![vec![("C2", 3), ("S", 7)], vec![("C2", 4), ("S", 8)]],
            ),
        ];
        let set = full_match(&execs);
        let fused = fuse(&execs, &set, "run1", &FuseOptions::default()).unwrap();
        let by_id: BTreeMap<&str, &ExecutionDataset> =
            execs.iter().map(|e| (e.exec_id.as_str(), e)).collect();
        for (ci, col) in fused.columns.iter().enumerate() {
            let src = by_id[col.source_exec.as_str()];
            for (ri, row) in fused.rows.iter().enumerate() {
                let group = &set.groups[ri];
                let burst = src.burst(group.members[&col.source_exec]).unwrap();
                assert_eq!(
                    row.values[ci],
                    feature_cell(burst, &col.source_column),
                    "column {} row {ri}",
                    col.output
                );
            }
        }
    }

    #[test]
    fn empty_fused_dataset_emits_header_only_prv() {
        let fused = FusedDataset {
            base_exec: "run1".into(),
            counter_set: "A".into(),
            executions: vec!["run1".into()],
            columns: vec![],
            rows: vec![],
            partial_group_ids: vec![],
        };
        let (prv, _pcf) = emit_prv(&fused, None, None, &EmitOptions::default()).unwrap();
        assert_eq!(prv.lines().count(), 1);
        assert!(prv.starts_with("#Paraver"));
    }
}
