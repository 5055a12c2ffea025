//! Property tests over the matching invariants, the CSV interchange format
//! and the metric primitives.

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use burstfuse::matchset::{Pattern, Stage};
use burstfuse::model::{Burst, BurstRef, CallClassifier, CommContext, ExecutionDataset};
use burstfuse::pipeline::{match_executions, MatchOptions};
use burstfuse::stage1::stage1_match;
use burstfuse::stage2::{define_regions, group_unmatched, stage2_match, SimilarityWeights};
use burstfuse::table::{read_burst_csv, write_burst_csv};
use burstfuse::validation::{outlier_fence, pearson};

const CALLS: &[&str] = &[
    "MPI_BCAST",
    "MPI_ISEND",
    "MPI_TEST",
    "MPI_ALLREDUCE",
    "MPI_WAIT",
];

fn burst(rank: u32, seq: usize, begin: u64, dur: u64, before: usize, after: usize) -> Burst {
    let classifier = CallClassifier::default();
    let name = |i: usize| {
        if i == 0 {
            ""
        } else {
            CALLS[(i - 1) % CALLS.len()]
        }
    };
    let mut b = Burst::new(
        rank,
        begin,
        begin + dur,
        CommContext::bare(classifier.call(name(before), false)),
        CommContext::bare(classifier.call(name(after), false)),
    );
    b.seq_index = seq;
    b.rel_position = 0.5;
    b
}

prop_compose! {
    fn arb_rank_bursts(rank: u32)(
        specs in prop::collection::vec((1u64..80, 1u64..60, 0usize..6, 0usize..6), 1..10)
    ) -> Vec<Burst> {
        let mut t = 0u64;
        let mut out = Vec::new();
        for (i, (gap, dur, before, after)) in specs.into_iter().enumerate() {
            t += gap;
            out.push(burst(rank, i, t, dur, before, after));
            t += dur;
        }
        out
    }
}

prop_compose! {
    fn arb_execution(exec_idx: usize, ranks: u32)(
        all in (0..ranks).map(arb_rank_bursts).collect::<Vec<_>>()
    ) -> ExecutionDataset {
        let mut d = ExecutionDataset::new(format!("run{}", exec_idx + 1), "TEST");
        d.counter_names = vec!["PAPI_TOT_INS".into(), "PAPI_TOT_CYC".into()];
        for (r, bursts) in all.into_iter().enumerate() {
            d.ranks.insert(r as u32, bursts);
        }
        d
    }
}

fn arb_suite(n: usize, ranks: u32) -> impl Strategy<Value = Vec<ExecutionDataset>> {
    (0..n)
        .map(|i| arb_execution(i, ranks))
        .collect::<Vec<_>>()
        .prop_map(|v| v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every burst lands in exactly one group or once in `unmatched`.
    #[test]
    fn matching_partitions_every_execution(mut execs in arb_suite(3, 2)) {
        let set = match_executions(&mut execs, &MatchOptions::default()).unwrap();
        set.check_partition(&execs).unwrap();
    }

    /// Stage 1 only groups bursts with identical (before, after) patterns,
    /// and direct groups preserve the seq index across executions.
    #[test]
    fn stage1_respects_patterns_and_order(execs in arb_suite(2, 2)) {
        let out = stage1_match(&execs, false).unwrap();
        let by_id: BTreeMap<&str, &ExecutionDataset> = execs.iter().map(|e| (e.exec_id.as_str(), e)).collect();
        for g in &out.groups {
            let patterns: Vec<String> = g
                .members
                .iter()
                .map(|(e, r)| Pattern::of(by_id[e.as_str()].burst(*r).unwrap()).canonical())
                .collect();
            prop_assert!(patterns.windows(2).all(|w| w[0] == w[1]), "group {} mixes patterns", g.burst_id);
            if g.stage == Stage::Direct {
                let seqs: Vec<usize> = g.members.values().map(|r| r.seq_index).collect();
                prop_assert!(seqs.windows(2).all(|w| w[0] == w[1]));
            }
        }
    }

    /// Within a kept pattern the k-th group pairs the k-th occurrences, in
    /// begin-time order.
    #[test]
    fn stage1_pattern_groups_are_monotone(execs in arb_suite(2, 1)) {
        let out = stage1_match(&execs, false).unwrap();
        let by_id: BTreeMap<&str, &ExecutionDataset> = execs.iter().map(|e| (e.exec_id.as_str(), e)).collect();
        let mut last_begin: BTreeMap<(String, String), BTreeMap<String, u64>> = BTreeMap::new();
        for g in &out.groups {
            if g.stage != Stage::Pattern {
                continue;
            }
            // Group ids come out pattern-major, occurrence-minor.
            let key = (g.burst_id[..g.burst_id.rfind('_').unwrap()].to_string(), String::new());
            for (exec, r) in &g.members {
                let b = by_id[exec.as_str()].burst(*r).unwrap();
                let slot = last_begin.entry(key.clone()).or_default().entry(exec.clone()).or_insert(0);
                prop_assert!(b.begin_time >= *slot, "occurrences must advance in time");
                *slot = b.begin_time;
            }
        }
    }

    /// Burst CSV write -> read -> write is byte-identical.
    #[test]
    fn burst_csv_round_trips(mut exec in arb_execution(0, 2), values in prop::collection::vec(prop::option::of(0u64..5000), 64)) {
        let mut it = values.into_iter().cycle();
        let names = exec.counter_names.clone();
        for bursts in exec.ranks.values_mut() {
            for b in bursts.iter_mut() {
                for name in &names {
                    if let Some(Some(v)) = it.next() {
                        b.counters.insert(name.clone(), v);
                    }
                }
            }
        }
        let classifier = CallClassifier::default();
        let once = write_burst_csv(&exec).unwrap();
        let back = read_burst_csv(&once, &classifier).unwrap();
        prop_assert_eq!(&back, &exec);
        let twice = write_burst_csv(&back).unwrap();
        prop_assert_eq!(once, twice);
    }

    /// Raising the stage-2 threshold never loses accepted reference-candidate
    /// pairs, and for two executions never loses matched bursts.
    #[test]
    fn stage2_threshold_is_monotone(
        ref_positions in prop::collection::vec(0u64..1000, 1..8),
        cand_positions in prop::collection::vec(0u64..1000, 1..8),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let make = |exec: &str, positions: &[u64]| {
            let mut sorted = positions.to_vec();
            sorted.sort_unstable();
            let mut d = ExecutionDataset::new(exec, "TEST");
            let mut bursts = vec![burst(0, 0, 0, 1, 0, 2)];
            for (i, &p) in sorted.iter().enumerate() {
                bursts.push(burst(0, i + 1, 1200 + p * 10, 5, 2, 2));
            }
            let n = bursts.len();
            bursts.push(burst(0, n, 12000, 100, 2, 0));
            for (i, b) in bursts.iter_mut().enumerate() {
                b.seq_index = i;
            }
            d.ranks.insert(0, bursts);
            d
        };
        let mut a = make("run1", &ref_positions);
        let mut b = make("run2", &cand_positions);
        let mut regions = BTreeMap::new();
        regions.insert("run1".to_string(), define_regions(&mut a));
        regions.insert("run2".to_string(), define_regions(&mut b));
        let unmatched: BTreeMap<String, Vec<BurstRef>> = [
            ("run1".to_string(), (1..=ref_positions.len()).map(|s| BurstRef { rank: 0, seq_index: s }).collect()),
            ("run2".to_string(), (1..=cand_positions.len()).map(|s| BurstRef { rank: 0, seq_index: s }).collect()),
        ].into();
        let execs = [a, b];
        let groups = group_unmatched(&execs, &unmatched);
        let run = |threshold: f64| {
            let weights = SimilarityWeights { threshold, ..SimilarityWeights::default() };
            stage2_match(&execs, &regions, &groups, &weights)
        };
        let out_lo = run(lo);
        let out_hi = run(hi);
        let pairs = |out: &burstfuse::stage2::Stage2Outcome| -> usize {
            out.groups.iter().map(|g| g.members.len() - 1).sum()
        };
        prop_assert!(pairs(&out_hi) >= pairs(&out_lo));
        prop_assert!(out_hi.matched.len() >= out_lo.matched.len());
    }

    /// The fence never drops the minimum score and keeps a prefix of the
    /// sorted scores.
    #[test]
    fn fence_keeps_sorted_prefix(scores in prop::collection::vec(0.0f64..1e6, 1..200)) {
        let (fence, mask) = outlier_fence(&scores).unwrap();
        let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min <= fence);
        let mut sorted: Vec<(f64, bool)> = scores.iter().cloned().zip(mask.iter().cloned()).collect();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let first_dropped = sorted.iter().position(|(_, kept)| !kept).unwrap_or(sorted.len());
        prop_assert!(sorted[..first_dropped].iter().all(|(_, kept)| *kept));
        prop_assert!(sorted[first_dropped..].iter().all(|(_, kept)| !kept));
    }

    /// Pearson is invariant under positive-scale affine transforms.
    #[test]
    fn pearson_affine_invariant(
        xs in prop::collection::vec(-1000.0f64..1000.0, 3..50),
        ys_seed in prop::collection::vec(-1000.0f64..1000.0, 3..50),
        scale in 0.001f64..100.0,
        offset in -1000.0f64..1000.0,
    ) {
        let n = xs.len().min(ys_seed.len());
        let x = &xs[..n];
        let y = &ys_seed[..n];
        let scaled: Vec<f64> = x.iter().map(|v| scale * v + offset).collect();
        let a = pearson(x, y).unwrap();
        let b = pearson(&scaled, y).unwrap();
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
            (None, None) => {}
            other => prop_assert!(false, "affine transform changed definedness: {other:?}"),
        }
    }
}

/// With pure multiplicative counter noise, the validation RelDiff lands on
/// the generator's analytic expectation for a pair of runs.
#[test]
fn rel_diff_matches_generator_noise_expectation() {
    use burstfuse::synth::{
        expected_pair_rel_diff, generate_suite, CounterModel, SynthConfig, INS_MIX,
    };
    use burstfuse::validation::{validate, ValidationOptions};

    let sigma = 0.01;
    let mut cfg = SynthConfig::new(4, 300, vec!["INS_MIX".into(), "INS_MIX".into()], 7171);
    for name in INS_MIX {
        cfg.counter_models.insert(
            name.to_string(),
            CounterModel {
                base: 2000.0,
                rel_noise: sigma,
            },
        );
    }
    let suite = generate_suite(&cfg).unwrap();
    let mut execs = suite.executions.clone();
    let set = match_executions(&mut execs, &MatchOptions::default()).unwrap();
    let outcome = validate(&execs, &set, &ValidationOptions::default()).unwrap();
    let expected = expected_pair_rel_diff(sigma);
    for feature in INS_MIX {
        let report = outcome
            .report
            .features
            .iter()
            .find(|f| &f.feature == feature)
            .unwrap();
        let got = report.rel_diff.unwrap();
        assert!(
            (got - expected).abs() / expected < 0.10,
            "{feature}: rel_diff {got} vs analytic {expected}"
        );
    }
}

/// Greedy stage-2 with weights (1,0,0) equals a brute-force
/// nearest-relative-position assignment on small groups.
#[test]
fn stage2_reduces_to_nearest_position_assignment() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let n_ref = rng.random_range(1..=10usize);
        let n_cand = rng.random_range(1..=10usize);
        let gen_positions = |rng: &mut rand_chacha::ChaCha12Rng, n: usize| -> Vec<u64> {
            let mut v: Vec<u64> = (0..n).map(|_| rng.random_range(0..995)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let ref_pos = gen_positions(&mut rng, n_ref);
        let cand_pos = gen_positions(&mut rng, n_cand);

        let make = |exec: &str, positions: &[u64]| {
            let mut d = ExecutionDataset::new(exec, "TEST");
            let mut bursts = vec![burst(0, 0, 0, 1, 0, 2)];
            for (i, &p) in positions.iter().enumerate() {
                bursts.push(burst(0, i + 1, 2 + p * 10, 4, 2, 2));
            }
            let n = bursts.len();
            bursts.push(burst(0, n, 10000, 10, 2, 0));
            for (i, b) in bursts.iter_mut().enumerate() {
                b.seq_index = i;
            }
            d.ranks.insert(0, bursts);
            d
        };
        let mut a = make("run1", &ref_pos);
        let mut b = make("run2", &cand_pos);
        let mut regions = BTreeMap::new();
        regions.insert("run1".to_string(), define_regions(&mut a));
        regions.insert("run2".to_string(), define_regions(&mut b));
        let unmatched: BTreeMap<String, Vec<BurstRef>> = [
            (
                "run1".to_string(),
                (1..=ref_pos.len())
                    .map(|s| BurstRef {
                        rank: 0,
                        seq_index: s,
                    })
                    .collect(),
            ),
            (
                "run2".to_string(),
                (1..=cand_pos.len())
                    .map(|s| BurstRef {
                        rank: 0,
                        seq_index: s,
                    })
                    .collect(),
            ),
        ]
        .into();
        let execs = [a.clone(), b.clone()];
        let groups = group_unmatched(&execs, &unmatched);
        let weights = SimilarityWeights {
            temporal: 1.0,
            size: 0.0,
            partner: 0.0,
            threshold: 0.3,
        };
        let out = stage2_match(&execs, &regions, &groups, &weights);

        // Brute-force oracle: positions within the shared region, reference
        // side = the execution with more candidates, references in temporal
        // order taking the nearest unused position below the threshold.
        let span_a = (a.ranks[&0].last().unwrap().end_time - a.ranks[&0][0].begin_time) as f64;
        let span_b = (b.ranks[&0].last().unwrap().end_time - b.ranks[&0][0].begin_time) as f64;
        let pos = |d: &ExecutionDataset, seq: usize, span: f64| -> f64 {
            let bursts = &d.ranks[&0];
            let b = &bursts[seq];
            ((b.begin_time + b.end_time) as f64 / 2.0 - bursts[0].begin_time as f64) / span
        };
        let (ref_d, ref_span, cand_d, cand_span, ref_is_a) = if ref_pos.len() >= cand_pos.len() {
            (&a, span_a, &b, span_b, true)
        } else {
            (&b, span_b, &a, span_a, false)
        };
        let ref_count = if ref_is_a {
            ref_pos.len()
        } else {
            cand_pos.len()
        };
        let cand_count = if ref_is_a {
            cand_pos.len()
        } else {
            ref_pos.len()
        };
        let mut used = vec![false; cand_count];
        let mut expected_pairs: Vec<(usize, usize)> = Vec::new();
        for r in 1..=ref_count {
            let rp = pos(ref_d, r, ref_span);
            let mut best: Option<(f64, usize)> = None;
            for c in 1..=cand_count {
                if used[c - 1] {
                    continue;
                }
                let d = (rp - pos(cand_d, c, cand_span)).abs();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, c));
                }
            }
            if let Some((d, c)) = best {
                if d < 0.3 {
                    used[c - 1] = true;
                    expected_pairs.push((r, c));
                }
            }
        }
        let mut got_pairs: Vec<(usize, usize)> = out
            .groups
            .iter()
            .map(|g| {
                let (ra, rb) = (g.members["run1"].seq_index, g.members["run2"].seq_index);
                if ref_is_a {
                    (ra, rb)
                } else {
                    (rb, ra)
                }
            })
            .collect();
        got_pairs.sort_unstable();
        expected_pairs.sort_unstable();
        assert_eq!(
            got_pairs, expected_pairs,
            "refs {ref_pos:?} cands {cand_pos:?}"
        );
    }
}
