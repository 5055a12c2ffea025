//! Pipeline configuration: JSON file plus CLI-flag overrides.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{ExtractOptions, MpiTypeIds};
use crate::model::{CallClassifier, DerivedConfig, DEFAULT_COLLECTIVES};
use crate::stage2::SimilarityWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mpi_event_type_ids: MpiTypeIds,
    /// Collective call names; prefixed variants match by containment.
    pub collective_names: Vec<String>,
    /// pcf labels starting with one of these prefixes are counters.
    pub counter_label_prefixes: Vec<String>,
    pub weights: SimilarityWeights,
    /// Outlier fence on validation metrics.
    pub fence: bool,
    pub acceptance_cutoff: f64,
    /// Prefix applied to non-base columns during fusion; `{exec}` expands to
    /// the execution id.
    pub prefix_scheme: String,
    /// First event-type id allocated to counters missing from the base
    /// trace when emitting a fused `.prv`.
    pub new_event_type_base_id: u64,
    pub instructions_counter: String,
    pub cycles_counter: String,
    /// Rank -> node for the concurrency metric; empty means one node.
    pub node_map: BTreeMap<u32, u32>,
    pub log_level: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mpi_event_type_ids: MpiTypeIds::default(),
            collective_names: DEFAULT_COLLECTIVES.iter().map(|s| s.to_string()).collect(),
            counter_label_prefixes: vec!["PAPI_".to_string()],
            weights: SimilarityWeights::default(),
            fence: true,
            acceptance_cutoff: 0.30,
            prefix_scheme: "{exec}_".to_string(),
            new_event_type_base_id: 42001000,
            instructions_counter: "PAPI_TOT_INS".to_string(),
            cycles_counter: "PAPI_TOT_CYC".to_string(),
            node_map: BTreeMap::new(),
            log_level: "info".to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(0.0..=1.0).contains(&self.acceptance_cutoff) {
            return Err(Error::Config("acceptance cutoff must lie in [0, 1]".into()));
        }
        if !self.prefix_scheme.contains("{exec}") {
            return Err(Error::Config("prefix scheme must contain {exec}".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn classifier(&self) -> CallClassifier {
        CallClassifier::new(self.collective_names.iter().cloned())
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            mpi_type_ids: self.mpi_event_type_ids,
            counter_label_prefixes: self.counter_label_prefixes.clone(),
            classifier: self.classifier(),
            derived: DerivedConfig {
                instructions_counter: self.instructions_counter.clone(),
                cycles_counter: self.cycles_counter.clone(),
                node_map: if self.node_map.is_empty() {
                    None
                } else {
                    Some(self.node_map.clone())
                },
            },
        }
    }
}
