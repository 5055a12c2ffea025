//! The burst-table CSV interchange format.
//!
//! One row per compute burst. An empty cell always means "absent", which is
//! distinct from `0`. `write` then `read` then `write` is byte-identical
//! under the same call classifier.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Burst, CallClassifier, CommContext, ExecutionDataset};

/// Mandatory leading columns, in order; counter columns follow.
pub const BASE_COLUMNS: &[&str] = &[
    "exec_id",
    "counter_set",
    "task_id",
    "seq_index",
    "begin_time_ns",
    "end_time_ns",
    "duration_ns",
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
    "region_id",
    "burst_id",
];

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_burst_csv(dataset: &ExecutionDataset) -> Result<String> {
    dataset.validate()?;
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let header: Vec<&str> = BASE_COLUMNS
        .iter()
        .copied()
        .chain(dataset.counter_names.iter().map(|s| s.as_str()))
        .collect();
    w.write_record(&header).expect("in-memory write");
    for bursts in dataset.ranks.values() {
        for b in bursts {
            let mut row: Vec<String> = vec![
                dataset.exec_id.clone(),
                dataset.counter_set_name.clone(),
                b.task_id.to_string(),
                b.seq_index.to_string(),
                b.begin_time.to_string(),
                b.end_time.to_string(),
                b.duration.to_string(),
                b.rel_position.to_string(),
                fmt_opt(&b.ipc),
                fmt_opt(&b.frequency),
                fmt_opt(&b.concurrency),
                b.before.call.name.clone(),
                b.after.call.name.clone(),
                fmt_opt(&b.before.partner),
                fmt_opt(&b.after.partner),
                fmt_opt(&b.before.size),
                fmt_opt(&b.after.size),
                fmt_opt(&b.region_id),
                b.burst_id.clone().unwrap_or_default(),
            ];
            for name in &dataset.counter_names {
                row.push(fmt_opt(&b.counters.get(name).copied()));
            }
            w.write_record(&row).expect("in-memory write");
        }
    }
    let bytes = w.into_inner().expect("in-memory flush");
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

struct RowReader<'a> {
    record: &'a csv::StringRecord,
    line: usize,
}

impl<'a> RowReader<'a> {
    fn cell(&self, idx: usize) -> &'a str {
        self.record.get(idx).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, idx: usize, col: &str) -> Result<T> {
        self.cell(idx).parse().map_err(|_| Error::Parse {
            line: self.line,
            msg: format!("column {col}: cannot parse {:?}", self.cell(idx)),
        })
    }

    fn parse_opt<T: std::str::FromStr>(&self, idx: usize, col: &str) -> Result<Option<T>> {
        if self.cell(idx).is_empty() {
            Ok(None)
        } else {
            self.parse(idx, col).map(Some)
        }
    }
}

pub fn read_burst_csv(text: &str, classifier: &CallClassifier) -> Result<ExecutionDataset> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = r
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    for (i, expected) in BASE_COLUMNS.iter().enumerate() {
        match headers.get(i) {
            Some(found) if found == *expected => {}
            _ => return Err(Error::MissingColumn(expected.to_string())),
        }
    }
    let counter_names: Vec<String> = headers
        .iter()
        .skip(BASE_COLUMNS.len())
        .map(|s| s.to_string())
        .collect();

    let mut dataset = ExecutionDataset::new("", "");
    dataset.counter_names = counter_names.clone();
    let mut seen_meta = false;
    let mut keys: std::collections::BTreeSet<(u32, usize)> = Default::default();

    for (idx, rec) in r.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let row = RowReader {
            record: &record,
            line,
        };
        let exec_id = row.cell(0);
        let counter_set = row.cell(1);
        if !seen_meta {
            dataset.exec_id = exec_id.to_string();
            dataset.counter_set_name = counter_set.to_string();
            seen_meta = true;
        } else if dataset.exec_id != exec_id || dataset.counter_set_name != counter_set {
            return Err(Error::Invalid(format!(
                "mixed exec_id/counter_set at line {line}: {exec_id}/{counter_set}"
            )));
        }
        let task_id: u32 = row.parse(2, "task_id")?;
        let seq_index: usize = row.parse(3, "seq_index")?;
        if !keys.insert((task_id, seq_index)) {
            return Err(Error::DuplicateBurst {
                task: task_id,
                seq: seq_index,
            });
        }
        let begin: u64 = row.parse(4, "begin_time_ns")?;
        let end: u64 = row.parse(5, "end_time_ns")?;
        let duration: u64 = row.parse(6, "duration_ns")?;
        if end < begin || duration != end - begin {
            return Err(Error::Parse {
                line,
                msg: "inconsistent begin/end/duration".into(),
            });
        }
        let partner_before: Option<u32> = row.parse_opt(13, "partner_before")?;
        let partner_after: Option<u32> = row.parse_opt(14, "partner_after")?;
        let before = CommContext {
            call: classifier.call(row.cell(11), partner_before.is_some()),
            partner: partner_before,
            size: row.parse_opt(15, "size_before")?,
        };
        let after = CommContext {
            call: classifier.call(row.cell(12), partner_after.is_some()),
            partner: partner_after,
            size: row.parse_opt(16, "size_after")?,
        };
        let mut counters = BTreeMap::new();
        for (k, name) in counter_names.iter().enumerate() {
            if let Some(v) = row.parse_opt::<u64>(BASE_COLUMNS.len() + k, name)? {
                counters.insert(name.clone(), v);
            }
        }
        let burst = Burst {
            task_id,
            begin_time: begin,
            end_time: end,
            duration,
            counters,
            before,
            after,
            seq_index,
            rel_position: row.parse(7, "rel_position")?,
            ipc: row.parse_opt(8, "ipc")?,
            frequency: row.parse_opt(9, "frequency")?,
            concurrency: row.parse_opt(10, "concurrency")?,
            region_id: row.parse_opt(17, "region_id")?,
            burst_id: {
                let s = row.cell(18);
                if s.is_empty() {
                    None
                } else {
                    Some(s.to_string())
                }
            },
        };
        dataset.ranks.entry(task_id).or_default().push(burst);
    }
    dataset.validate()?;
    Ok(dataset)
}
