//! Synthetic execution suites with known ground truth.
//!
//! One logical execution is sampled from a template library, then N observed
//! copies are derived: each restricted to its counter set, with per-counter
//! multiplicative noise and optional structural perturbations (time jitter,
//! extra bursts next to collectives, dropped bursts, async pattern drift).
//! Everything is driven by one seed through per-(execution, rank) RNG
//! streams, so the same config is byte-reproducible.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::emit::CallTable;
use crate::error::{Error, Result};
use crate::extract::MpiTypeIds;
use crate::matchset::{MatchGroup, Stage};
use crate::model::{
    compute_derived_features, Burst, CallClassifier, CommContext, DerivedConfig, ExecutionDataset,
};
use crate::pcf::{write_pcf, PcfEventType};
use crate::prv::PrvWriter;

/// Per-counter value model: expected magnitude per unit of burst work and a
/// relative run-to-run noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterModel {
    pub base: f64,
    pub rel_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbations {
    /// Relative sigma of per-slot duration jitter.
    #[serde(default)]
    pub time_jitter: f64,
    /// Probability of inserting an extra burst after a collective call.
    #[serde(default)]
    pub extra_burst_rate: f64,
    /// Probability of merging a burst into its successor.
    #[serde(default)]
    pub drop_burst_rate: f64,
    /// Probability of splitting the burst after a drift-eligible call.
    #[serde(default)]
    pub pattern_drift: f64,
    /// Call inserted by `extra_burst_rate`; non-collective by default so
    /// region ordinals stay aligned.
    #[serde(default = "default_extra_call")]
    pub extra_call: String,
    /// Call inserted by `pattern_drift`.
    #[serde(default = "default_drift_call")]
    pub drift_call: String,
}

fn default_extra_call() -> String {
    "MPI_COMM_FREE".to_string()
}

fn default_drift_call() -> String {
    "MPI_TEST".to_string()
}

impl Default for Perturbations {
    fn default() -> Self {
        Perturbations {
            time_jitter: 0.0,
            extra_burst_rate: 0.0,
            drop_burst_rate: 0.0,
            pattern_drift: 0.0,
            extra_call: default_extra_call(),
            drift_call: default_drift_call(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallSpec {
    pub name: String,
    /// Pairwise exchange with rank^1 carrying this many bytes.
    #[serde(default)]
    pub exchange_bytes: Option<u64>,
    /// Eligible for pattern-drift insertion.
    #[serde(default)]
    pub drift: bool,
    #[serde(default)]
    pub call_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub calls: Vec<CallSpec>,
    /// Mean duration of the compute burst preceding each call.
    pub compute_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub ranks: u32,
    pub iterations: u32,
    /// Iteration i uses template i % len.
    pub pattern_library: Vec<TemplateSpec>,
    /// Overrides of the built-in counter models.
    #[serde(default)]
    pub counter_models: BTreeMap<String, CounterModel>,
    #[serde(default)]
    pub perturbations: Perturbations,
    pub seed: u64,
    /// Counter-set name per execution (presets: INS_MIX, OPS_SET, OPS_CYC).
    pub executions: Vec<String>,
}

pub const INS_MIX: &[&str] = &[
    "PAPI_TOT_INS",
    "PAPI_TOT_CYC",
    "PAPI_LD_INS",
    "PAPI_SR_INS",
    "PAPI_BR_INS",
    "PAPI_L3_TCM",
    "PAPI_L1_DCM",
    "PAPI_L2_DCM",
];

pub const OPS_SET: &[&str] = &[
    "PAPI_TOT_INS",
    "PAPI_VEC_INS",
    "PAPI_FP_INS",
    "PAPI_FP_OPS",
    "PAPI_DP_OPS",
    "PAPI_SP_OPS",
    "PAPI_VEC_SP",
    "PAPI_VEC_DP",
];

pub const OPS_CYC: &[&str] = &[
    "PAPI_TOT_INS",
    "PAPI_TOT_CYC",
    "PAPI_VEC_DP",
    "PAPI_VEC_SP",
    "PAPI_DP_OPS",
];

pub fn counter_set(name: &str) -> Result<Vec<String>> {
    let list = match name {
        "INS_MIX" => INS_MIX,
        "OPS_SET" => OPS_SET,
        "OPS_CYC" => OPS_CYC,
        _ => return Err(Error::UnknownCounterSet(name.to_string())),
    };
    Ok(list.iter().map(|s| s.to_string()).collect())
}

/// Built-in per-counter magnitudes (per microsecond of work) and noise
/// levels. Cache counters get a higher default noise than instruction and
/// floating-point counters, matching their observed run-to-run variability.
fn default_counter_models() -> BTreeMap<String, CounterModel> {
    let m = |base: f64, rel_noise: f64| CounterModel { base, rel_noise };
    [
        ("PAPI_TOT_INS", m(2000.0, 0.003)),
        ("PAPI_TOT_CYC", m(2200.0, 0.01)),
        ("PAPI_LD_INS", m(600.0, 0.003)),
        ("PAPI_SR_INS", m(300.0, 0.003)),
        ("PAPI_BR_INS", m(200.0, 0.003)),
        ("PAPI_L1_DCM", m(50.0, 0.04)),
        ("PAPI_L2_DCM", m(10.0, 0.05)),
        ("PAPI_L3_TCM", m(2.0, 0.06)),
        ("PAPI_VEC_INS", m(100.0, 0.001)),
        ("PAPI_FP_INS", m(150.0, 0.001)),
        ("PAPI_FP_OPS", m(300.0, 0.001)),
        ("PAPI_DP_OPS", m(150.0, 0.001)),
        ("PAPI_SP_OPS", m(150.0, 0.001)),
        ("PAPI_VEC_SP", m(50.0, 0.001)),
        ("PAPI_VEC_DP", m(50.0, 0.001)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl SynthConfig {
    /// Library of deterministic collective + pairwise-exchange iterations.
    pub fn default_library() -> Vec<TemplateSpec> {
        vec![
            TemplateSpec {
                calls: vec![
                    CallSpec {
                        name: "MPI_SENDRECV".into(),
                        exchange_bytes: Some(4096),
                        drift: false,
                        call_ns: None,
                    },
                    CallSpec {
                        name: "MPI_ALLREDUCE".into(),
                        exchange_bytes: None,
                        drift: false,
                        call_ns: None,
                    },
                ],
                compute_ns: 50_000,
            },
            TemplateSpec {
                calls: vec![CallSpec {
                    name: "MPI_BCAST".into(),
                    exchange_bytes: None,
                    drift: false,
                    call_ns: None,
                }],
                compute_ns: 30_000,
            },
            TemplateSpec {
                calls: vec![
                    CallSpec {
                        name: "MPI_SENDRECV".into(),
                        exchange_bytes: Some(8192),
                        drift: false,
                        call_ns: None,
                    },
                    CallSpec {
                        name: "MPI_BARRIER".into(),
                        exchange_bytes: None,
                        drift: false,
                        call_ns: None,
                    },
                ],
                compute_ns: 40_000,
            },
        ]
    }

    /// Library dominated by drift-eligible asynchronous calls, with one
    /// collective per iteration as a region anchor.
    pub fn async_library() -> Vec<TemplateSpec> {
        let call = |name: &str, drift: bool| CallSpec {
            name: name.into(),
            exchange_bytes: None,
            drift,
            call_ns: None,
        };
        vec![TemplateSpec {
            calls: vec![
                call("MPI_IRECV", true),
                call("MPI_ISEND", true),
                call("MPI_TEST", true),
                call("MPI_TEST", true),
                call("MPI_ALLREDUCE", false),
            ],
            compute_ns: 20_000,
        }]
    }

    pub fn new(ranks: u32, iterations: u32, executions: Vec<String>, seed: u64) -> Self {
        SynthConfig {
            ranks,
            iterations,
            pattern_library: Self::default_library(),
            counter_models: BTreeMap::new(),
            perturbations: Perturbations::default(),
            seed,
            executions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.executions.is_empty() {
            return Err(Error::Config("executions list is empty".into()));
        }
        for name in &self.executions {
            counter_set(name)?;
        }
        if self.pattern_library.is_empty() {
            return Err(Error::Config("pattern library is empty".into()));
        }
        let p = &self.perturbations;
        for (label, rate) in [
            ("time_jitter", p.time_jitter),
            ("extra_burst_rate", p.extra_burst_rate),
            ("drop_burst_rate", p.drop_burst_rate),
            ("pattern_drift", p.pattern_drift),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!(
                    "{label} must lie in [0, 1], got {rate}"
                )));
            }
        }
        for t in &self.pattern_library {
            if t.compute_ns == 0 {
                return Err(Error::Config("compute_ns must be positive".into()));
            }
            for c in &t.calls {
                if c.drift && c.exchange_bytes.is_some() {
                    return Err(Error::Config(format!(
                        "call {} cannot be both drift-eligible and an exchange",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SynthConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
enum Slot {
    Compute {
        /// Logical burst ordinal; None for perturbation artifacts.
        id: Option<usize>,
        dur: u64,
        work: f64,
    },
    Call {
        name: String,
        dur: u64,
        partner: Option<u32>,
        bytes: Option<u64>,
        drift: bool,
        collective: bool,
        droppable: bool,
    },
}

fn stream_rng(seed: u64, exec_idx: u64, rank: u32) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((exec_idx << 20) | rank as u64);
    rng
}

fn sample_dur(rng: &mut ChaCha12Rng, mean: u64) -> u64 {
    ((mean as f64 * rng.random_range(0.75..1.25)) as u64).max(1)
}

/// The logical skeleton of one rank: alternating compute and call slots,
/// ending with a trailing compute burst.
fn skeleton(config: &SynthConfig, classifier: &CallClassifier, rank: u32) -> Vec<Slot> {
    let mut rng = stream_rng(config.seed, 0, rank);
    let mut slots = Vec::new();
    let mut ordinal = 0usize;
    let push_compute =
        |slots: &mut Vec<Slot>, rng: &mut ChaCha12Rng, mean: u64, ordinal: &mut usize| {
            let dur = sample_dur(rng, mean);
            let work = dur as f64 / 1000.0 * rng.random_range(0.8..1.2);
            slots.push(Slot::Compute {
                id: Some(*ordinal),
                dur,
                work,
            });
            *ordinal += 1;
        };
    let mut last_mean = config.pattern_library[0].compute_ns;
    for iter in 0..config.iterations {
        let template = &config.pattern_library[iter as usize % config.pattern_library.len()];
        last_mean = template.compute_ns;
        for call in &template.calls {
            push_compute(&mut slots, &mut rng, template.compute_ns, &mut ordinal);
            let partner = call.exchange_bytes.and_then(|_| {
                let p = rank ^ 1;
                (p < config.ranks).then_some(p)
            });
            let name = call.name.to_ascii_uppercase();
            let collective = classifier.is_collective(&name);
            slots.push(Slot::Call {
                dur: sample_dur(
                    &mut rng,
                    call.call_ns.unwrap_or(template.compute_ns / 10).max(1),
                ),
                partner,
                bytes: partner.and(call.exchange_bytes),
                drift: call.drift,
                droppable: !collective && call.exchange_bytes.is_none(),
                collective,
                name,
            });
        }
    }
    push_compute(&mut slots, &mut rng, last_mean, &mut ordinal);
    slots
}

/// Applies structural perturbations and time jitter to one rank's skeleton.
fn perturb(
    slots: &[Slot],
    rng: &mut ChaCha12Rng,
    pert: &Perturbations,
    classifier: &CallClassifier,
) -> Vec<Slot> {
    let mut out: Vec<Slot> = Vec::with_capacity(slots.len());
    let mut i = 0;
    while i < slots.len() {
        match &slots[i] {
            Slot::Compute { id: _, dur, work } => {
                // Drop: merge this burst and the next across a droppable call.
                if pert.drop_burst_rate > 0.0 {
                    if let (
                        Some(Slot::Call {
                            droppable: true,
                            dur: call_dur,
                            ..
                        }),
                        Some(Slot::Compute {
                            dur: dur2,
                            work: work2,
                            ..
                        }),
                    ) = (slots.get(i + 1), slots.get(i + 2))
                    {
                        if rng.random::<f64>() < pert.drop_burst_rate {
                            out.push(Slot::Compute {
                                id: None,
                                dur: dur + call_dur + dur2,
                                work: work + work2,
                            });
                            i += 3;
                            continue;
                        }
                    }
                }
                out.push(slots[i].clone());
                i += 1;
            }
            Slot::Call {
                drift,
                collective,
                dur: call_dur,
                ..
            } => {
                out.push(slots[i].clone());
                i += 1;
                let insert = if *drift
                    && pert.pattern_drift > 0.0
                    && rng.random::<f64>() < pert.pattern_drift
                {
                    Some(&pert.drift_call)
                } else if *collective
                    && pert.extra_burst_rate > 0.0
                    && rng.random::<f64>() < pert.extra_burst_rate
                {
                    Some(&pert.extra_call)
                } else {
                    None
                };
                if let Some(new_call) = insert {
                    if let Some(Slot::Compute { id, dur, work }) = slots.get(i).cloned() {
                        // Split the following burst: a small artifact burst,
                        // the inserted call, then the original (slightly
                        // shortened) burst keeping its identity.
                        let extra_dur = (dur / 20).max(1).min(dur - 1).max(1);
                        out.push(Slot::Compute {
                            id: None,
                            dur: extra_dur,
                            work: work * 0.05,
                        });
                        let name = new_call.to_ascii_uppercase();
                        out.push(Slot::Call {
                            collective: classifier.is_collective(&name),
                            name,
                            dur: (call_dur / 2).max(1),
                            partner: None,
                            bytes: None,
                            drift: false,
                            droppable: true,
                        });
                        out.push(Slot::Compute {
                            id,
                            dur: (dur - extra_dur).max(1),
                            work: work * 0.95,
                        });
                        i += 1;
                    }
                }
            }
        }
    }
    if pert.time_jitter > 0.0 {
        let normal = Normal::new(0.0, pert.time_jitter).expect("valid sigma");
        for slot in &mut out {
            let (Slot::Compute { dur, .. } | Slot::Call { dur, .. }) = slot;
            let factor = (1.0 + normal.sample(rng)).max(0.05);
            *dur = ((*dur as f64 * factor) as u64).max(1);
        }
    }
    out
}

/// One pairwise-exchange interval: (partner, bytes, begin, end).
type Exchange = (u32, u64, u64, u64);
/// Rank -> exchange intervals in occurrence order.
type ExchangeTable = BTreeMap<u32, Vec<Exchange>>;

struct RankBuild {
    bursts: Vec<Burst>,
    /// logical id -> seq index.
    truth: Vec<(usize, usize)>,
    exchanges: Vec<Exchange>,
}

fn materialize(rank: u32, slots: &[Slot], classifier: &CallClassifier) -> RankBuild {
    // Assign times, then derive each burst's surrounding contexts.
    let mut t = 0u64;
    let mut timed: Vec<(u64, u64, &Slot)> = Vec::with_capacity(slots.len());
    for slot in slots {
        let (Slot::Compute { dur, .. } | Slot::Call { dur, .. }) = slot;
        timed.push((t, t + dur, slot));
        t += dur;
    }
    let ctx_of = |slot: Option<&(u64, u64, &Slot)>| -> CommContext {
        match slot {
            Some((
                _,
                _,
                Slot::Call {
                    name,
                    partner,
                    bytes,
                    ..
                },
            )) => CommContext {
                call: crate::model::MpiCall {
                    name: name.clone(),
                    class: classifier.classify(name, partner.is_some()),
                },
                partner: *partner,
                size: *bytes,
            },
            _ => CommContext::boundary(),
        }
    };
    let mut build = RankBuild {
        bursts: Vec::new(),
        truth: Vec::new(),
        exchanges: Vec::new(),
    };
    for (idx, (begin, end, slot)) in timed.iter().enumerate() {
        match slot {
            Slot::Compute { id, .. } => {
                let before = ctx_of(idx.checked_sub(1).and_then(|p| timed.get(p)));
                let after = ctx_of(timed.get(idx + 1));
                let seq = build.bursts.len();
                let mut b = Burst::new(rank, *begin, *end, before, after);
                b.seq_index = seq;
                if let Some(logical) = id {
                    build.truth.push((*logical, seq));
                }
                build.bursts.push(b);
            }
            Slot::Call { partner, bytes, .. } => {
                if let (Some(p), Some(sz)) = (partner, bytes) {
                    build.exchanges.push((*p, *sz, *begin, *end));
                }
            }
        }
    }
    build
}

/// Work factors per burst, aligned with the burst list.
fn work_of(slots: &[Slot]) -> Vec<f64> {
    slots
        .iter()
        .filter_map(|s| match s {
            Slot::Compute { work, .. } => Some(*work),
            _ => None,
        })
        .collect()
}

pub struct SynthSuite {
    pub executions: Vec<ExecutionDataset>,
    pub ground_truth: Vec<MatchGroup>,
    /// Per execution, per rank: exchange intervals for `.prv` emission.
    exchange_tables: Vec<ExchangeTable>,
}

/// Expected RelDiff between two executions whose only divergence is
/// multiplicative counter noise with the given sigma: `E|eps1 - eps2|` for
/// independent normal noise, `2 sigma / sqrt(pi)`.
pub fn expected_pair_rel_diff(sigma: f64) -> f64 {
    2.0 * sigma / std::f64::consts::PI.sqrt()
}

pub fn generate_suite(config: &SynthConfig) -> Result<SynthSuite> {
    config.validate()?;
    let classifier = CallClassifier::default();
    let models = {
        let mut m = default_counter_models();
        for (k, v) in &config.counter_models {
            m.insert(k.clone(), *v);
        }
        m
    };

    let skeletons: BTreeMap<u32, Vec<Slot>> = (0..config.ranks)
        .map(|r| (r, skeleton(config, &classifier, r)))
        .collect();

    // logical (rank, ordinal) -> per-exec (exec_id, seq).
    let mut truth_members: BTreeMap<(u32, usize), Vec<(String, usize)>> = BTreeMap::new();
    let mut executions = Vec::new();
    let mut exchange_tables = Vec::new();

    for (e_idx, set_name) in config.executions.iter().enumerate() {
        let counters = counter_set(set_name)?;
        let exec_id = format!("run{}", e_idx + 1);
        let mut dataset = ExecutionDataset::new(&exec_id, set_name);
        dataset.counter_names = counters.clone();
        let mut exchanges = ExchangeTable::new();

        for rank in 0..config.ranks {
            let mut rng = stream_rng(config.seed, e_idx as u64 + 1, rank);
            let slots = perturb(
                &skeletons[&rank],
                &mut rng,
                &config.perturbations,
                &classifier,
            );
            let mut build = materialize(rank, &slots, &classifier);
            let works = work_of(&slots);
            debug_assert_eq!(works.len(), build.bursts.len());
            for (b, work) in build.bursts.iter_mut().zip(&works) {
                for name in &counters {
                    let model = models.get(name).copied().unwrap_or(CounterModel {
                        base: 100.0,
                        rel_noise: 0.01,
                    });
                    let eps = if model.rel_noise > 0.0 {
                        Normal::new(0.0, model.rel_noise)
                            .expect("valid sigma")
                            .sample(&mut rng)
                            .clamp(-0.9, 0.9)
                    } else {
                        0.0
                    };
                    let value = (model.base * work * (1.0 + eps)).round().max(0.0) as u64;
                    b.counters.insert(name.clone(), value);
                }
            }
            for (logical, seq) in &build.truth {
                truth_members
                    .entry((rank, *logical))
                    .or_default()
                    .push((exec_id.clone(), *seq));
            }
            exchanges.insert(rank, build.exchanges);
            dataset.ranks.insert(rank, build.bursts);
        }

        // Synchronize the trace end: every rank's trailing burst runs to the
        // common span.
        let span = dataset
            .ranks
            .values()
            .filter_map(|b| b.last())
            .map(|b| b.end_time)
            .max()
            .unwrap_or(0);
        for bursts in dataset.ranks.values_mut() {
            if let Some(last) = bursts.last_mut() {
                last.end_time = span;
                last.duration = last.end_time - last.begin_time;
            }
        }

        let dataset = compute_derived_features(&dataset, &DerivedConfig::default());
        dataset.validate()?;
        executions.push(dataset);
        exchange_tables.push(exchanges);
    }

    let mut ground_truth = Vec::new();
    for ((rank, ordinal), members) in truth_members {
        if members.len() < 2 {
            continue;
        }
        ground_truth.push(MatchGroup {
            burst_id: format!("gt_r{rank}_{ordinal}"),
            stage: Stage::Truth,
            score: None,
            members: members
                .into_iter()
                .map(|(exec, seq)| {
                    (
                        exec,
                        crate::model::BurstRef {
                            rank,
                            seq_index: seq,
                        },
                    )
                })
                .collect(),
        });
    }

    Ok(SynthSuite {
        executions,
        ground_truth,
        exchange_tables,
    })
}

impl SynthSuite {
    pub fn truth_match_set(&self) -> crate::matchset::MatchSet {
        let executions: Vec<String> = self.executions.iter().map(|e| e.exec_id.clone()).collect();
        let mut matched: BTreeMap<String, std::collections::BTreeSet<crate::model::BurstRef>> =
            executions
                .iter()
                .map(|e| (e.clone(), Default::default()))
                .collect();
        for g in &self.ground_truth {
            for (exec, r) in &g.members {
                matched.get_mut(exec).expect("known exec").insert(*r);
            }
        }
        let unmatched = self
            .executions
            .iter()
            .map(|e| {
                let refs: Vec<crate::model::BurstRef> = e
                    .ranks
                    .iter()
                    .flat_map(|(&rank, bursts)| {
                        bursts
                            .iter()
                            .map(move |b| crate::model::BurstRef {
                                rank,
                                seq_index: b.seq_index,
                            })
                            .filter(|r| !matched[&e.exec_id].contains(r))
                    })
                    .collect();
                (e.exec_id.clone(), refs)
            })
            .collect();
        crate::matchset::MatchSet {
            executions,
            groups: self.ground_truth.clone(),
            unmatched,
            stats: None,
        }
    }

    /// Emits one execution as a `.prv`/`.pcf` pair. The full pipeline
    /// (parse, extract) applied to the output reproduces the dataset.
    pub fn emit_as_prv(&self, exec_index: usize) -> Result<(String, String)> {
        let dataset = self
            .executions
            .get(exec_index)
            .ok_or_else(|| Error::Config(format!("no execution {exec_index}")))?;
        emit_dataset_as_prv(dataset, &self.exchange_tables[exec_index])
    }
}

/// Emission used by the generator: bursts are adjacent (each consecutive
/// pair shares its delimiting call), exchanges carry communication records.
fn emit_dataset_as_prv(
    dataset: &ExecutionDataset,
    exchanges: &ExchangeTable,
) -> Result<(String, String)> {
    let classifier = CallClassifier::default();
    let counter_ids: Vec<(u64, String)> = dataset
        .counter_names
        .iter()
        .enumerate()
        .map(|(i, n)| (42000050 + i as u64, n.clone()))
        .collect();
    let id_of: BTreeMap<&str, u64> = counter_ids
        .iter()
        .map(|(id, n)| (n.as_str(), *id))
        .collect();
    let mut calls = CallTable::new(MpiTypeIds::default(), None);
    let mut writer = PrvWriter::new();

    let ftime = dataset
        .ranks
        .values()
        .filter_map(|b| b.last())
        .map(|b| b.end_time)
        .max()
        .unwrap_or(0);
    let ntasks = dataset.ranks.keys().max().map(|r| r + 1).unwrap_or(0);

    for (&rank, bursts) in &dataset.ranks {
        for (i, b) in bursts.iter().enumerate() {
            let mut entries: Vec<(u64, u64)> = Vec::new();
            if !b.after.call.is_boundary() {
                let (t, v) = calls.entry_for(&b.after.call.name, &classifier, b.after.call.class);
                entries.push((t, v));
            }
            for name in &dataset.counter_names {
                if let Some(&value) = b.counters.get(name) {
                    entries.push((id_of[name.as_str()], value));
                }
            }
            if !entries.is_empty() {
                writer.event(rank, b.end_time, &entries);
            }
            if !b.after.call.is_boundary() {
                let close_at = bursts.get(i + 1).map(|n| n.begin_time).unwrap_or(ftime);
                let (t, _) = calls.entry_for(&b.after.call.name, &classifier, b.after.call.class);
                writer.event(rank, close_at, &[(t, 0)]);
            }
        }
    }

    // One record per pairwise exchange, endpoints inside both parties'
    // intervals. The lower rank is written as the sender.
    for (&rank, list) in exchanges {
        for (k, &(partner, bytes, begin, end)) in list.iter().enumerate() {
            if rank >= partner {
                continue;
            }
            let peer = exchanges.get(&partner).map(|v| v.as_slice()).unwrap_or(&[]);
            let Some(&(_, _, pbegin, pend)) = peer.get(k) else {
                log::warn!("rank {partner}: missing matching exchange {k} for rank {rank}");
                continue;
            };
            let send_time = begin + (end - begin) / 2;
            let recv_time = pbegin + (pend - pbegin) / 2;
            writer.comm(rank, send_time, partner, recv_time, bytes, k as i64);
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
    Ok((writer.render(ftime, ntasks), write_pcf(&pcf_types)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{extract_bursts, ExtractOptions};
    use crate::pcf::parse_pcf;
    use crate::pipeline::{match_executions, MatchOptions};
    use crate::prv::parse_prv;

    fn small_config(executions: Vec<&str>, seed: u64) -> SynthConfig {
        SynthConfig::new(
            2,
            12,
            executions.into_iter().map(String::from).collect(),
            seed,
        )
    }

    #[test]
    fn unknown_counter_set_is_an_error() {
        let cfg = small_config(vec!["NOPE"], 1);
        assert!(matches!(
            generate_suite(&cfg),
            Err(Error::UnknownCounterSet(_))
        ));
    }

    #[test]
    fn zero_perturbation_gives_structurally_identical_datasets() {
        let mut cfg = small_config(vec!["INS_MIX", "INS_MIX", "INS_MIX"], 7);
        for model in default_counter_models().keys() {
            cfg.counter_models.insert(
                model.clone(),
                CounterModel {
                    base: 100.0,
                    rel_noise: 0.0,
                },
            );
        }
        let suite = generate_suite(&cfg).unwrap();
        let a = &suite.executions[0];
        for other in &suite.executions[1..] {
            let mut clone = other.clone();
            clone.exec_id = a.exec_id.clone();
            assert_eq!(&clone, a);
        }
        // Stage 1 recovers the full truth with direct matches only.
        let mut execs = suite.executions.clone();
        let set = match_executions(&mut execs, &MatchOptions::default()).unwrap();
        assert!(set.groups.iter().all(|g| g.stage == Stage::Direct));
        let recovery = crate::matchset::pairwise_recovery(&suite.ground_truth, &set.groups);
        assert_eq!(recovery, 1.0);
    }

    #[test]
    fn seed_determinism_is_byte_exact() {
        let mut cfg = small_config(vec!["INS_MIX", "OPS_SET"], 99);
        cfg.perturbations.time_jitter = 0.01;
        cfg.perturbations.extra_burst_rate = 0.05;
        let a = generate_suite(&cfg).unwrap();
        let b = generate_suite(&cfg).unwrap();
        assert_eq!(a.executions, b.executions);
        assert_eq!(a.ground_truth, b.ground_truth);
        let (prv_a, pcf_a) = a.emit_as_prv(0).unwrap();
        let (prv_b, pcf_b) = b.emit_as_prv(0).unwrap();
        assert_eq!(prv_a, prv_b);
        assert_eq!(pcf_a, pcf_b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_suite(&small_config(vec!["INS_MIX"], 1)).unwrap();
        let b = generate_suite(&small_config(vec!["INS_MIX"], 2)).unwrap();
        assert_ne!(a.executions[0], b.executions[0]);
    }

    #[test]
    fn ground_truth_is_a_valid_match_set() {
        let mut cfg = small_config(vec!["INS_MIX", "OPS_SET"], 5);
        cfg.perturbations.extra_burst_rate = 0.1;
        cfg.perturbations.pattern_drift = 0.1;
        cfg.pattern_library = SynthConfig::async_library();
        let suite = generate_suite(&cfg).unwrap();
        let set = suite.truth_match_set();
        set.check_partition(&suite.executions).unwrap();
    }

    #[test]
    fn emitted_prv_round_trips_exactly() {
        let mut cfg = small_config(vec!["INS_MIX", "OPS_SET"], 42);
        cfg.perturbations.time_jitter = 0.02;
        let suite = generate_suite(&cfg).unwrap();
        for (i, original) in suite.executions.iter().enumerate() {
            let (prv, pcf) = suite.emit_as_prv(i).unwrap();
            let trace = parse_prv(&prv).unwrap();
            let dict = parse_pcf(&pcf).unwrap();
            let (roundtrip, warnings) = extract_bursts(
                &trace,
                &dict,
                &original.exec_id,
                &original.counter_set_name,
                &ExtractOptions::default(),
            )
            .unwrap();
            assert_eq!(warnings, Default::default());
            assert_eq!(
                &roundtrip, original,
                "execution {i} must survive the round trip"
            );
        }
    }

    #[test]
    fn round_trip_conserves_counter_sums_per_rank() {
        let cfg = small_config(vec!["INS_MIX"], 3);
        let suite = generate_suite(&cfg).unwrap();
        let original = &suite.executions[0];
        let (prv, pcf) = suite.emit_as_prv(0).unwrap();
        let trace = parse_prv(&prv).unwrap();
        let dict = parse_pcf(&pcf).unwrap();
        let (roundtrip, _) =
            extract_bursts(&trace, &dict, "run1", "INS_MIX", &ExtractOptions::default()).unwrap();
        for (rank, bursts) in &original.ranks {
            for name in &original.counter_names {
                let sum = |d: &ExecutionDataset| -> u64 {
                    d.ranks[rank]
                        .iter()
                        .filter_map(|b| b.counters.get(name))
                        .sum()
                };
                assert_eq!(sum(&roundtrip), sum(original), "rank {rank} counter {name}");
                let _ = bursts;
            }
        }
    }

    #[test]
    fn empty_suite_emits_header_only_files() {
        let cfg = SynthConfig::new(0, 5, vec!["INS_MIX".into()], 1);
        let suite = generate_suite(&cfg).unwrap();
        let (prv, _pcf) = suite.emit_as_prv(0).unwrap();
        assert_eq!(prv.lines().count(), 1);
    }

    #[test]
    fn recovery_declines_with_extra_burst_rate_on_average() {
        let rates = [0.0, 0.05, 0.25];
        let mut means = Vec::new();
        for &rate in &rates {
            let mut total = 0.0;
            for seed in 0..10 {
                let mut cfg = small_config(vec!["INS_MIX", "OPS_SET"], 1000 + seed);
                cfg.perturbations.extra_burst_rate = rate;
                let suite = generate_suite(&cfg).unwrap();
                let mut execs = suite.executions.clone();
                let set = match_executions(&mut execs, &MatchOptions::default()).unwrap();
                total += crate::matchset::pairwise_recovery(&suite.ground_truth, &set.groups);
            }
            means.push(total / 10.0);
        }
        assert_eq!(means[0], 1.0);
        assert!(
            means[0] >= means[1] && means[1] >= means[2],
            "recovery means {means:?} must be non-increasing"
        );
    }
}
