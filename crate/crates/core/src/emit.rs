//! Shared machinery for emitting synthetic `.prv`/`.pcf` pairs: MPI call
//! value tables and counter event-type allocation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::extract::MpiTypeIds;
use crate::model::{CallClassifier, MpiClass};
use crate::pcf::{PcfDictionary, PcfEventType};

/// Maps MPI call names to (event-type, value) pairs, reusing a base trace's
/// dictionary when given and allocating fresh values otherwise.
pub struct CallTable {
    ids: MpiTypeIds,
    by_name: BTreeMap<String, (u64, u64)>,
    next_value: BTreeMap<u64, u64>,
}

impl CallTable {
    pub fn new(ids: MpiTypeIds, base: Option<&PcfDictionary>) -> Self {
        let mut by_name = BTreeMap::new();
        let mut next_value: BTreeMap<u64, u64> =
            [(ids.p2p, 1), (ids.collective, 1), (ids.other, 1)].into();
        if let Some(pcf) = base {
            for (&(type_id, value), label) in &pcf.value_labels {
                if !ids.contains(type_id) || value == 0 {
                    continue;
                }
                by_name
                    .entry(label.to_ascii_uppercase())
                    .or_insert((type_id, value));
                let next = next_value.entry(type_id).or_insert(1);
                *next = (*next).max(value + 1);
            }
        }
        CallTable {
            ids,
            by_name,
            next_value,
        }
    }

    /// (event-type, value) for a call name, allocating a fresh value under
    /// the class-appropriate event type when the name is new.
    pub fn entry_for(
        &mut self,
        name: &str,
        classifier: &CallClassifier,
        class_hint: MpiClass,
    ) -> (u64, u64) {
        let canon = name.to_ascii_uppercase();
        if let Some(&pair) = self.by_name.get(&canon) {
            return pair;
        }
        let type_id = if classifier.is_collective(&canon) {
            self.ids.collective
        } else if class_hint == MpiClass::PointToPoint {
            self.ids.p2p
        } else {
            self.ids.other
        };
        let value = self.next_value.entry(type_id).or_insert(1);
        let pair = (type_id, *value);
        *value += 1;
        self.by_name.insert(canon, pair);
        pair
    }

    /// The three MPI event-type declarations with every allocated value.
    pub fn pcf_event_types(&self) -> Vec<PcfEventType> {
        let labels = [
            (self.ids.p2p, "MPI Point-to-point"),
            (self.ids.collective, "MPI Collective Comm"),
            (self.ids.other, "MPI Other"),
        ];
        labels
            .into_iter()
            .map(|(type_id, label)| {
                let mut values: Vec<(u64, String)> = self
                    .by_name
                    .iter()
                    .filter(|(_, (t, _))| *t == type_id)
                    .map(|(name, (_, v))| (*v, name.clone()))
                    .collect();
                values.sort();
                PcfEventType {
                    gradient: 0,
                    type_id,
                    label: label.to_string(),
                    values,
                }
            })
            .collect()
    }
}

/// Assigns an event-type id to every counter column. Columns whose name is
/// already declared in the base dictionary reuse its id; the rest get
/// sequential ids from `base_id`. A fresh id that collides with an existing
/// base event type is an error.
pub fn allocate_counter_ids(
    names: &[String],
    base: Option<&PcfDictionary>,
    base_id: u64,
) -> Result<Vec<(u64, String)>> {
    let mut out = Vec::with_capacity(names.len());
    let mut next = base_id;
    let mut collisions = Vec::new();
    for name in names {
        let reused = base.and_then(|p| p.type_of_label(name));
        match reused {
            Some(id) => out.push((id, name.clone())),
            None => {
                if base.is_some_and(|p| p.event_labels.contains_key(&next)) {
                    collisions.push(next);
                }
                out.push((next, name.clone()));
                next += 1;
            }
        }
    }
    if !collisions.is_empty() {
        return Err(Error::IdCollision(collisions));
    }
    Ok(out)
}
