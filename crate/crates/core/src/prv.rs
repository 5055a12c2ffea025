//! Parser and writer for the supported `.prv` subset: colon-separated
//! records, one per line. Record types 1 (state), 2 (event) and 3
//! (communication) are recognized; anything else is skipped with a counted
//! warning. Only single-threaded (MPI-only) traces are supported.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Header line of a `.prv` file. Only the `#Paraver` magic is mandatory;
/// total time and task count fall back to values derived from the records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrvHeader {
    pub total_time: Option<u64>,
    pub ntasks: Option<u32>,
}

/// One event record: a timestamped list of (event-type, value) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    /// 0-based rank (task ids are 1-based on disk).
    pub task: u32,
    pub time: u64,
    pub entries: Vec<(u64, u64)>,
}

/// One communication record. Times are the logical send/receive times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommRecord {
    pub sender_task: u32,
    pub receiver_task: u32,
    pub send_time: u64,
    pub recv_time: u64,
    pub size: u64,
    pub tag: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseWarnings {
    pub unknown_records: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTrace {
    pub header: PrvHeader,
    /// Events per rank, in file order (validated non-decreasing in time).
    pub events: BTreeMap<u32, Vec<RawEvent>>,
    pub comms: Vec<CommRecord>,
    pub warnings: ParseWarnings,
    /// Maximum timestamp seen in any record.
    pub max_time: u64,
}

impl ParsedTrace {
    /// Trace span: header total time when parsable, else max record time.
    pub fn total_time(&self) -> u64 {
        self.header.total_time.unwrap_or(self.max_time)
    }

    /// Rank count: header task count when parsable, else max rank seen + 1.
    pub fn rank_count(&self) -> u32 {
        let seen = self.events.keys().max().map(|r| r + 1).unwrap_or(0).max(
            self.comms
                .iter()
                .map(|c| c.sender_task.max(c.receiver_task) + 1)
                .max()
                .unwrap_or(0),
        );
        self.header.ntasks.unwrap_or(seen).max(seen)
    }
}

fn parse_header(line: &str) -> PrvHeader {
    // `#Paraver (<timestamp>):<total_time>:<nodes...>:<appls>:<ntasks(...)>`
    // The timestamp itself contains colons, so fields start after ')'.
    let rest = match line.find(')') {
        Some(pos) => &line[pos + 1..],
        None => return PrvHeader::default(),
    };
    let rest = rest.strip_prefix(':').unwrap_or(rest);
    let mut fields = rest.split(':');
    let total_time = fields
        .next()
        .map(|f| f.trim_end_matches("_ns"))
        .and_then(|f| f.parse::<u64>().ok());
    let _nodes = fields.next();
    let _nappl = fields.next();
    let ntasks = fields
        .next()
        .and_then(|f| f.split('(').next())
        .and_then(|f| f.parse::<u32>().ok());
    PrvHeader { total_time, ntasks }
}

fn field<'a>(parts: &mut impl Iterator<Item = &'a str>, line: usize, what: &str) -> Result<u64> {
    parts
        .next()
        .and_then(|p| p.parse::<u64>().ok())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("missing or non-integer field `{what}`"),
        })
}

fn check_thread(thread: u64, line: usize) -> Result<()> {
    if thread != 1 {
        return Err(Error::HybridTrace { line });
    }
    Ok(())
}

fn check_task(task: u64, line: usize) -> Result<u32> {
    if task == 0 {
        return Err(Error::Parse {
            line,
            msg: "task ids are 1-based on disk, found 0".into(),
        });
    }
    Ok((task - 1) as u32)
}

/// Parses the `.prv` text. Fails on a missing `#Paraver` magic, thread ids
/// other than 1, malformed recognized records, and time going backwards
/// within a rank. Unknown record types are counted and skipped.
pub fn parse_prv(text: &str) -> Result<ParsedTrace> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((idx, l)) => {
                if !l.starts_with("#Paraver") {
                    return Err(Error::Parse {
                        line: idx + 1,
                        msg: "missing #Paraver magic".into(),
                    });
                }
                break parse_header(l);
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "empty file".into(),
                })
            }
        }
    };

    let mut trace = ParsedTrace {
        header,
        ..Default::default()
    };
    let mut last_time: BTreeMap<u32, u64> = BTreeMap::new();

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(':');
        let kind = parts.next().unwrap_or("");
        match kind {
            "1" => {
                let _cpu = field(&mut parts, line_no, "cpu")?;
                let _appl = field(&mut parts, line_no, "appl")?;
                let task = field(&mut parts, line_no, "task")?;
                let thread = field(&mut parts, line_no, "thread")?;
                check_thread(thread, line_no)?;
                let _rank = check_task(task, line_no)?;
                let _begin = field(&mut parts, line_no, "begin")?;
                let end = field(&mut parts, line_no, "end")?;
                let _state = field(&mut parts, line_no, "state")?;
                trace.max_time = trace.max_time.max(end);
                // States are parsed but not used for burst extraction.
            }
            "2" => {
                let _cpu = field(&mut parts, line_no, "cpu")?;
                let _appl = field(&mut parts, line_no, "appl")?;
                let task = field(&mut parts, line_no, "task")?;
                let thread = field(&mut parts, line_no, "thread")?;
                check_thread(thread, line_no)?;
                let rank = check_task(task, line_no)?;
                let time = field(&mut parts, line_no, "time")?;
                let mut entries = Vec::new();
                loop {
                    match parts.next() {
                        None => break,
                        Some(t) => {
                            let type_id: u64 = t.parse().map_err(|_| Error::Parse {
                                line: line_no,
                                msg: format!("non-integer event type {t:?}"),
                            })?;
                            let value = field(&mut parts, line_no, "value")?;
                            entries.push((type_id, value));
                        }
                    }
                }
                if entries.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "event record without (type, value) pairs".into(),
                    });
                }
                if let Some(&prev) = last_time.get(&rank) {
                    if time < prev {
                        return Err(Error::NonMonotonic {
                            rank,
                            line: line_no,
                        });
                    }
                }
                last_time.insert(rank, time);
                trace.max_time = trace.max_time.max(time);
                trace.events.entry(rank).or_default().push(RawEvent {
                    task: rank,
                    time,
                    entries,
                });
            }
            "3" => {
                let _cpu_s = field(&mut parts, line_no, "cpu_s")?;
                let _appl_s = field(&mut parts, line_no, "appl_s")?;
                let task_s = field(&mut parts, line_no, "task_s")?;
                let thread_s = field(&mut parts, line_no, "thread_s")?;
                check_thread(thread_s, line_no)?;
                let lsend = field(&mut parts, line_no, "logical_send")?;
                let _psend = field(&mut parts, line_no, "physical_send")?;
                let _cpu_r = field(&mut parts, line_no, "cpu_r")?;
                let _appl_r = field(&mut parts, line_no, "appl_r")?;
                let task_r = field(&mut parts, line_no, "task_r")?;
                let thread_r = field(&mut parts, line_no, "thread_r")?;
                check_thread(thread_r, line_no)?;
                let lrecv = field(&mut parts, line_no, "logical_recv")?;
                let _precv = field(&mut parts, line_no, "physical_recv")?;
                let size = field(&mut parts, line_no, "size")?;
                let tag = parts
                    .next()
                    .and_then(|p| p.parse::<i64>().ok())
                    .ok_or_else(|| Error::Parse {
                        line: line_no,
                        msg: "missing or non-integer field `tag`".into(),
                    })?;
                let sender = check_task(task_s, line_no)?;
                let receiver = check_task(task_r, line_no)?;
                trace.max_time = trace.max_time.max(lsend).max(lrecv);
                trace.comms.push(CommRecord {
                    sender_task: sender,
                    receiver_task: receiver,
                    send_time: lsend,
                    recv_time: lrecv,
                    size,
                    tag,
                });
            }
            _ => {
                trace.warnings.unknown_records += 1;
            }
        }
    }
    if trace.warnings.unknown_records > 0 {
        log::warn!(
            "skipped {} unrecognized .prv records",
            trace.warnings.unknown_records
        );
    }
    Ok(trace)
}

/// Accumulates records and renders a `.prv` file, time-sorted, with the
/// fixed header layout this tool emits. The header timestamp is constant so
/// identical inputs produce byte-identical traces.
#[derive(Debug, Default)]
pub struct PrvWriter {
    events: Vec<(u64, usize, String)>,
    comms: Vec<(u64, usize, String)>,
    seq: usize,
}

impl PrvWriter {
    pub fn new() -> Self {
        PrvWriter::default()
    }

    /// Event record at `time` for 0-based `rank` with (type, value) pairs.
    pub fn event(&mut self, rank: u32, time: u64, entries: &[(u64, u64)]) {
        debug_assert!(!entries.is_empty());
        let mut line = format!("2:{0}:1:{0}:1:{1}", rank + 1, time);
        for (t, v) in entries {
            line.push_str(&format!(":{t}:{v}"));
        }
        self.events.push((time, self.seq, line));
        self.seq += 1;
    }

    pub fn comm(
        &mut self,
        sender: u32,
        send_time: u64,
        receiver: u32,
        recv_time: u64,
        size: u64,
        tag: i64,
    ) {
        let line = format!(
            "3:{0}:1:{0}:1:{1}:{1}:{2}:1:{2}:1:{3}:{3}:{4}:{5}",
            sender + 1,
            send_time,
            receiver + 1,
            recv_time,
            size,
            tag
        );
        self.comms.push((send_time, self.seq, line));
        self.seq += 1;
    }

    pub fn render(mut self, total_time: u64, ntasks: u32) -> String {
        let task_list = (0..ntasks).map(|_| "1:1").collect::<Vec<_>>().join(",");
        let mut out = format!(
            "#Paraver (01/01/2000 at 00:00):{total_time}_ns:1({ntasks}):1:{ntasks}({task_list})\n"
        );
        let mut records: Vec<(u64, usize, String)> =
            Vec::with_capacity(self.events.len() + self.comms.len());
        records.append(&mut self.events);
        records.append(&mut self.comms);
        records.sort_by_key(|(time, seq, _)| (*time, *seq));
        for (_, _, line) in records {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}
