//! Parser and writer for the supported `.pcf` subset: `EVENT_TYPE` blocks
//! (lines `gradient type label`), each optionally followed by a `VALUES`
//! block (lines `value label`). Blocks are separated by blank lines; unknown
//! sections are skipped.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Event-type and event-value labels from a Paraver companion file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PcfDictionary {
    pub event_labels: BTreeMap<u64, String>,
    pub value_labels: BTreeMap<(u64, u64), String>,
}

impl PcfDictionary {
    pub fn label_of(&self, event_type: u64) -> Option<&str> {
        self.event_labels.get(&event_type).map(|s| s.as_str())
    }

    pub fn value_label(&self, event_type: u64, value: u64) -> Option<&str> {
        self.value_labels
            .get(&(event_type, value))
            .map(|s| s.as_str())
    }

    /// Event-type ids whose label starts with one of the prefixes, in id order.
    pub fn types_with_label_prefix(&self, prefixes: &[String]) -> Vec<(u64, String)> {
        self.event_labels
            .iter()
            .filter(|(_, label)| prefixes.iter().any(|p| label.starts_with(p.as_str())))
            .map(|(id, label)| (*id, label.clone()))
            .collect()
    }

    /// Reverse lookup of an event-type id by exact label.
    pub fn type_of_label(&self, label: &str) -> Option<u64> {
        self.event_labels
            .iter()
            .find(|(_, l)| l.as_str() == label)
            .map(|(id, _)| *id)
    }

    /// Reverse lookup of an event value by label under one event type.
    pub fn value_of_label(&self, event_type: u64, label: &str) -> Option<u64> {
        self.value_labels
            .iter()
            .find(|((t, _), l)| *t == event_type && l.eq_ignore_ascii_case(label))
            .map(|((_, v), _)| *v)
    }
}

enum Section {
    None,
    EventType,
    Values,
    Unknown,
}

fn is_section_header(line: &str) -> bool {
    !line.is_empty()
        && line
            .chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
        && line.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

pub fn parse_pcf(text: &str) -> Result<PcfDictionary> {
    let mut dict = PcfDictionary::default();
    let mut section = Section::None;
    // Event-type ids accumulated since the last EVENT_TYPE header; a VALUES
    // block applies to all of them.
    let mut pending: Vec<u64> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() {
            section = Section::None;
            pending.clear();
            continue;
        }
        match line.trim() {
            "EVENT_TYPE" => {
                section = Section::EventType;
                pending.clear();
                continue;
            }
            "VALUES" => {
                section = Section::Values;
                continue;
            }
            other if is_section_header(other) => {
                section = Section::Unknown;
                pending.clear();
                continue;
            }
            _ => {}
        }
        match section {
            Section::EventType => {
                let mut parts = line.split_whitespace();
                let _gradient = parts.next();
                let type_id: u64 =
                    parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::Parse {
                            line: line_no,
                            msg: format!("malformed EVENT_TYPE line: {line:?}"),
                        })?;
                let label = parts.collect::<Vec<_>>().join(" ");
                dict.event_labels.insert(type_id, label);
                pending.push(type_id);
            }
            Section::Values => {
                let mut parts = line.split_whitespace();
                let value: u64 =
                    parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| Error::Parse {
                            line: line_no,
                            msg: format!("malformed VALUES line (non-integer key): {line:?}"),
                        })?;
                let label = parts.collect::<Vec<_>>().join(" ");
                for &t in &pending {
                    dict.value_labels.insert((t, value), label.clone());
                }
            }
            Section::None | Section::Unknown => {}
        }
    }
    Ok(dict)
}

/// Declaration of one event type for `write_pcf`.
#[derive(Debug, Clone)]
pub struct PcfEventType {
    pub gradient: u32,
    pub type_id: u64,
    pub label: String,
    /// (value, label) pairs; value 0 / "End" is added automatically for
    /// types that have any values.
    pub values: Vec<(u64, String)>,
}

pub fn write_pcf(types: &[PcfEventType]) -> String {
    let mut out = String::new();
    for t in types {
        out.push_str("EVENT_TYPE\n");
        out.push_str(&format!("{}    {}    {}\n", t.gradient, t.type_id, t.label));
        if !t.values.is_empty() {
            out.push_str("VALUES\n");
            out.push_str("0      End\n");
            for (v, label) in &t.values {
                out.push_str(&format!("{v}      {label}\n"));
            }
        }
        out.push('\n');
    }
    out
}
