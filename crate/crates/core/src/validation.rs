//! Matching-quality validation for executions recorded with identical
//! counter sets: Pearson correlation against the base trace, relative
//! difference and MAE against the mean of the non-base traces, a one-sided
//! outlier fence on the per-burst scores, and the share of bursts within the
//! 30% relative-difference cutoff.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::select_base;
use crate::matchset::MatchSet;
use crate::model::{Burst, ExecutionDataset};

/// Sample Pearson correlation. `None` marks the undefined case (a constant
/// vector); it is reported as "n/a", never silently zero.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput("pearson needs at least 2 samples".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        sx += (a - mx) * (a - mx);
        sy += (b - my) * (b - my);
    }
    if sx == 0.0 || sy == 0.0 {
        return Ok(None);
    }
    // sqrt(sx * sy) keeps r at exactly 1.0 for identical vectors.
    Ok(Some(cov / (sx * sy).sqrt()))
}

/// Mean of `|b_i - mu_i| / b_i` restricted to rows with `b_i > 0`; `None`
/// when no such row exists.
pub fn relative_difference(base: &[f64], mu: &[f64]) -> Result<Option<f64>> {
    if base.len() != mu.len() {
        return Err(Error::LengthMismatch {
            left: base.len(),
            right: mu.len(),
        });
    }
    let scores: Vec<f64> = base
        .iter()
        .zip(mu)
        .filter(|(b, _)| **b > 0.0)
        .map(|(b, m)| (b - m).abs() / b)
        .collect();
    if scores.is_empty() {
        Ok(None)
    } else {
        Ok(Some(scores.iter().sum::<f64>() / scores.len() as f64))
    }
}

/// Mean absolute deviation over all rows, zeros included.
pub fn mean_absolute_error(base: &[f64], mu: &[f64]) -> Result<f64> {
    if base.len() != mu.len() {
        return Err(Error::LengthMismatch {
            left: base.len(),
            right: mu.len(),
        });
    }
    if base.is_empty() {
        return Err(Error::EmptyInput("mae needs at least 1 sample".into()));
    }
    Ok(base.iter().zip(mu).map(|(b, m)| (b - m).abs()).sum::<f64>() / base.len() as f64)
}

/// Linear-interpolation quantile between order statistics (the common
/// "type 7" convention): `h = (n-1)p`, interpolated between `floor(h)` and
/// `ceil(h)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One-sided fence `U = q95 + 1.5 (q95 - q05)`; keeps scores `<= U`.
/// Returns the fence and a keep mask aligned with the input.
pub fn outlier_fence(scores: &[f64]) -> Result<(f64, Vec<bool>)> {
    if scores.is_empty() {
        return Err(Error::EmptyInput(
            "outlier fence needs at least 1 score".into(),
        ));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    let q05 = quantile(&sorted, 0.05);
    let q95 = quantile(&sorted, 0.95);
    let fence = q95 + 1.5 * (q95 - q05);
    Ok((fence, scores.iter().map(|&s| s <= fence).collect()))
}

/// Percentage of relative differences strictly below the cutoff; `None` for
/// an empty input.
pub fn acceptance_rate(rel_diffs: &[f64], cutoff: f64) -> Option<f64> {
    if rel_diffs.is_empty() {
        return None;
    }
    let below = rel_diffs.iter().filter(|&&d| d < cutoff).count();
    Some(100.0 * below as f64 / rel_diffs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    /// Apply the outlier fence before averaging (`--fence on|off`).
    pub fence: bool,
    pub acceptance_cutoff: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            fence: true,
            acceptance_cutoff: 0.30,
        }
    }
}

/// Per-feature validation result. Undefined metrics stay `None` ("n/a").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub feature: String,
    /// Correlation of the base against each non-base trace, on fenced rows.
    pub correlation_per_trace: BTreeMap<String, Option<f64>>,
    pub correlation_mean: Option<f64>,
    pub mae: Option<f64>,
    pub rel_diff: Option<f64>,
    pub acceptance_rate: Option<f64>,
    /// Fence on the absolute per-burst deviations (None when fencing is off).
    pub fence_upper: Option<f64>,
    pub samples_kept: usize,
    pub samples_dropped: usize,
    /// Rows where the feature is defined in every execution.
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub base_exec: String,
    pub executions: Vec<String>,
    pub counter_set: String,
    pub matched_rows: usize,
    pub fence: bool,
    pub features: Vec<FeatureReport>,
}

/// Per-burst scores of one feature, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub task_id: u32,
    pub seq_index: usize,
    pub base: f64,
    pub matched_mean: f64,
    pub abs_err: f64,
    pub rel_err: Option<f64>,
    pub kept: bool,
}

#[derive(Debug, Clone)]
pub struct ValidationOutcome {
    pub report: ValidationReport,
    /// feature -> per-burst scores, fused-row order.
    pub scores: BTreeMap<String, Vec<ScoreRow>>,
}

fn feature_value(burst: &Burst, feature: &str) -> Option<f64> {
    match feature {
        "duration_ns" => Some(burst.duration as f64),
        "rel_position" => Some(burst.rel_position),
        "ipc" => burst.ipc,
        "frequency" => burst.frequency,
        "concurrency" => burst.concurrency,
        "size_before" => burst.before.size.map(|v| v as f64),
        "size_after" => burst.after.size.map(|v| v as f64),
        counter => burst.counters.get(counter).map(|&v| v as f64),
    }
}

const SHARED_NUMERIC_FEATURES: &[&str] = &[
    "duration_ns",
    "rel_position",
    "ipc",
    "frequency",
    "concurrency",
    "size_before",
    "size_after",
];

/// Compares every common feature across the matched rows of executions that
/// share one counter set.
pub fn validate(
    executions: &[ExecutionDataset],
    match_set: &MatchSet,
    opts: &ValidationOptions,
) -> Result<ValidationOutcome> {
    if executions.len() < 2 {
        return Err(Error::Config(format!(
            "validation needs at least 2 executions, got {}",
            executions.len()
        )));
    }
    let set_name = &executions[0].counter_set_name;
    for e in &executions[1..] {
        if &e.counter_set_name != set_name {
            return Err(Error::CounterSetMismatch(format!(
                "{} is {}, {} is {}",
                executions[0].exec_id, set_name, e.exec_id, e.counter_set_name
            )));
        }
    }
    let base = select_base(executions, match_set)?;
    let by_id: BTreeMap<&str, &ExecutionDataset> =
        executions.iter().map(|e| (e.exec_id.as_str(), e)).collect();

    // Matched rows: groups spanning all executions, ordered by base burst.
    let mut rows: Vec<BTreeMap<&str, &Burst>> = Vec::new();
    for g in match_set.complete_groups() {
        let mut members: BTreeMap<&str, &Burst> = BTreeMap::new();
        for (exec, r) in &g.members {
            let burst = by_id
                .get(exec.as_str())
                .and_then(|e| e.burst(*r))
                .ok_or_else(|| Error::GroupIntegrity(g.burst_id.clone()))?;
            members.insert(exec.as_str(), burst);
        }
        rows.push(members);
    }
    rows.sort_by_key(|m| {
        let b = m[base.as_str()];
        (b.task_id, b.begin_time, b.seq_index)
    });

    // Common counters, base order.
    let mut features: Vec<String> = SHARED_NUMERIC_FEATURES
        .iter()
        .map(|s| s.to_string())
        .collect();
    for name in &by_id[base.as_str()].counter_names {
        if executions
            .iter()
            .all(|e| e.counter_names.iter().any(|n| n == name))
        {
            features.push(name.clone());
        }
    }

    let others: Vec<&str> = executions
        .iter()
        .map(|e| e.exec_id.as_str())
        .filter(|e| *e != base.as_str())
        .collect();

    let mut reports = Vec::new();
    let mut all_scores = BTreeMap::new();
    for feature in &features {
        let mut b_vec: Vec<f64> = Vec::new();
        let mut traces: BTreeMap<&str, Vec<f64>> =
            others.iter().map(|e| (*e, Vec::new())).collect();
        let mut row_keys: Vec<(u32, usize)> = Vec::new();
        for m in &rows {
            let base_v = feature_value(m[base.as_str()], feature);
            let other_vs: Vec<Option<f64>> = others
                .iter()
                .map(|e| feature_value(m[e], feature))
                .collect();
            if let (Some(bv), true) = (base_v, other_vs.iter().all(|v| v.is_some())) {
                b_vec.push(bv);
                for (e, v) in others.iter().zip(other_vs) {
                    traces
                        .get_mut(e)
                        .expect("trace known")
                        .push(v.expect("checked"));
                }
                let bb = m[base.as_str()];
                row_keys.push((bb.task_id, bb.seq_index));
            }
        }
        let m_rows = b_vec.len();
        if m_rows == 0 {
            reports.push(FeatureReport {
                feature: feature.clone(),
                correlation_per_trace: others.iter().map(|e| (e.to_string(), None)).collect(),
                correlation_mean: None,
                mae: None,
                rel_diff: None,
                acceptance_rate: None,
                fence_upper: None,
                samples_kept: 0,
                samples_dropped: 0,
                rows: 0,
            });
            continue;
        }
        let mu: Vec<f64> = (0..m_rows)
            .map(|i| others.iter().map(|e| traces[e][i]).sum::<f64>() / others.len() as f64)
            .collect();
        let abs_scores: Vec<f64> = b_vec.iter().zip(&mu).map(|(b, m)| (b - m).abs()).collect();
        let (fence_upper, kept_mask) = if opts.fence {
            let (u, mask) = outlier_fence(&abs_scores)?;
            (Some(u), mask)
        } else {
            (None, vec![true; m_rows])
        };
        let kept_idx: Vec<usize> = (0..m_rows).filter(|&i| kept_mask[i]).collect();

        let mae_kept: Vec<f64> = kept_idx.iter().map(|&i| abs_scores[i]).collect();
        let mae = if mae_kept.is_empty() {
            None
        } else {
            Some(mae_kept.iter().sum::<f64>() / mae_kept.len() as f64)
        };

        // Relative scores on rows with a positive base value; the rel-diff
        // mean applies its own fence, the acceptance rate never does.
        let rel_all: Vec<f64> = b_vec
            .iter()
            .zip(&mu)
            .filter(|(b, _)| **b > 0.0)
            .map(|(b, m)| (b - m).abs() / b)
            .collect();
        let rel_diff = if rel_all.is_empty() {
            None
        } else if opts.fence {
            let (_, rel_mask) = outlier_fence(&rel_all)?;
            let kept: Vec<f64> = rel_all
                .iter()
                .zip(&rel_mask)
                .filter(|(_, k)| **k)
                .map(|(v, _)| *v)
                .collect();
            Some(kept.iter().sum::<f64>() / kept.len() as f64)
        } else {
            Some(rel_all.iter().sum::<f64>() / rel_all.len() as f64)
        };
        let acceptance = acceptance_rate(&rel_all, opts.acceptance_cutoff);

        let mut per_trace: BTreeMap<String, Option<f64>> = BTreeMap::new();
        for e in &others {
            let xb: Vec<f64> = kept_idx.iter().map(|&i| b_vec[i]).collect();
            let yt: Vec<f64> = kept_idx.iter().map(|&i| traces[e][i]).collect();
            let corr = if xb.len() >= 2 {
                pearson(&xb, &yt)?
            } else {
                None
            };
            per_trace.insert(e.to_string(), corr);
        }
        let defined: Vec<f64> = per_trace.values().filter_map(|c| *c).collect();
        let correlation_mean = if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        };

        let scores: Vec<ScoreRow> = (0..m_rows)
            .map(|i| ScoreRow {
                task_id: row_keys[i].0,
                seq_index: row_keys[i].1,
                base: b_vec[i],
                matched_mean: mu[i],
                abs_err: abs_scores[i],
                rel_err: if b_vec[i] > 0.0 {
                    Some(abs_scores[i] / b_vec[i])
                } else {
                    None
                },
                kept: kept_mask[i],
            })
            .collect();
        all_scores.insert(feature.clone(), scores);

        reports.push(FeatureReport {
            feature: feature.clone(),
            correlation_per_trace: per_trace,
            correlation_mean,
            mae,
            rel_diff,
            acceptance_rate: acceptance,
            fence_upper,
            samples_kept: kept_idx.len(),
            samples_dropped: m_rows - kept_idx.len(),
            rows: m_rows,
        });
    }

    Ok(ValidationOutcome {
        report: ValidationReport {
            base_exec: base,
            executions: executions.iter().map(|e| e.exec_id.clone()).collect(),
            counter_set: set_name.clone(),
            matched_rows: rows.len(),
            fence: opts.fence,
            features: reports,
        },
        scores: all_scores,
    })
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) => format!("{x:.digits$}"),
        None => "n/a".to_string(),
    }
}

/// Plain-text table mirroring the report layout:
/// Feature / Correlation / MAE / Rel Diff / <30% Diff.
pub fn render_report(report: &ValidationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "base: {}  executions: {}  matched rows: {}  fence: {}\n",
        report.base_exec,
        report.executions.join(","),
        report.matched_rows,
        if report.fence { "on" } else { "off" }
    ));
    let name_w = report
        .features
        .iter()
        .map(|f| f.feature.len())
        .max()
        .unwrap_or(7)
        .max(7);
    out.push_str(&format!(
        "{:<name_w$}  {:>11}  {:>14}  {:>8}  {:>9}\n",
        "Feature", "Correlation", "MAE", "Rel Diff", "<30% Diff"
    ));
    for f in &report.features {
        let acc = match f.acceptance_rate {
            Some(a) => format!("{a:.1}%"),
            None => "n/a".to_string(),
        };
        out.push_str(&format!(
            "{:<name_w$}  {:>11}  {:>14}  {:>8}  {:>9}\n",
            f.feature,
            fmt_opt(f.correlation_mean, 3),
            fmt_opt(f.mae, 3),
            fmt_opt(f.rel_diff, 3),
            acc
        ));
    }
    out
}

/// Per-burst score CSV for one feature.
pub fn write_score_csv(scores: &[ScoreRow]) -> String {
    let mut out = String::from("task_id,seq_index,base,matched_mean,abs_err,rel_err,kept\n");
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.task_id,
            s.seq_index,
            s.base,
            s.matched_mean,
            s.abs_err,
            s.rel_err.map(|v| v.to_string()).unwrap_or_default(),
            s.kept
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matchset::{MatchGroup, Stage};
    use crate::model::{BurstRef, CommContext};
    use approx::assert_relative_eq;

    #[test]
    fn pearson_identity_and_anticorrelation() {
        assert_eq!(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            Some(1.0)
        );
        let r = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])
            .unwrap()
            .unwrap();
        assert_relative_eq!(r, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn pearson_against_textbook_formula() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 2.0, 3.0, 5.0];
        let n = x.len() as f64;
        let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sx2: f64 = x.iter().map(|a| a * a).sum();
        let sy2: f64 = y.iter().map(|a| a * a).sum();
        let expected =
            (n * sxy - sx * sy) / ((n * sx2 - sx * sx).sqrt() * (n * sy2 - sy * sy).sqrt());
        let got = pearson(&x, &y).unwrap().unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn pearson_undefined_for_constant_vector() {
        assert_eq!(pearson(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), None);
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn pearson_affine_invariance() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let y = [2.0, 3.0, 7.0, 1.0, 4.0];
        let scaled: Vec<f64> = x.iter().map(|v| 3.5 * v + 11.0).collect();
        let a = pearson(&x, &y).unwrap().unwrap();
        let b = pearson(&scaled, &y).unwrap().unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn rel_diff_restricted_to_positive_base() {
        let r = relative_difference(&[10.0, 0.0, 20.0], &[11.0, 5.0, 20.0])
            .unwrap()
            .unwrap();
        assert_relative_eq!(r, 0.05, epsilon = 1e-12);
        assert_eq!(
            relative_difference(&[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            Some(0.0)
        );
        assert_eq!(relative_difference(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), None);
    }

    #[test]
    fn mae_includes_zeros() {
        let m = mean_absolute_error(&[10.0, 0.0], &[11.0, 2.0]).unwrap();
        assert_relative_eq!(m, 1.5, epsilon = 1e-12);
        assert_eq!(mean_absolute_error(&[5.0], &[5.0]).unwrap(), 0.0);
        assert!(mean_absolute_error(&[], &[]).is_err());
    }

    #[test]
    fn small_mae_does_not_force_correlation_one() {
        // Mirrors the coexistence of near-perfect correlation with non-zero
        // MAE: a tiny constant offset keeps correlation at 1 while MAE > 0,
        // and a noisy vector can have small MAE with correlation below 1.
        let b: Vec<f64> = (0..50).map(|i| 1000.0 + i as f64).collect();
        let shifted: Vec<f64> = b.iter().map(|v| v + 5.785).collect();
        assert_relative_eq!(
            pearson(&b, &shifted).unwrap().unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(mean_absolute_error(&b, &shifted).unwrap() > 5.0);

        let noisy: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(i, v)| v + if i % 2 == 0 { 30.0 } else { -30.0 })
            .collect();
        assert!(mean_absolute_error(&b, &noisy).unwrap() < 31.0);
        assert!(pearson(&b, &noisy).unwrap().unwrap() < 1.0);
    }

    #[test]
    fn fence_formula_example() {
        // 21 sorted scores with q05 = s[1] = 2 and q95 = s[19] = 10.
        let mut scores = vec![2.0, 2.0];
        for i in 0..17 {
            scores.push(2.0 + 8.0 * (i as f64 + 1.0) / 18.0);
        }
        scores.push(10.0);
        scores.push(10.0);
        assert_eq!(scores.len(), 21);
        let (u, kept) = outlier_fence(&scores).unwrap();
        assert_relative_eq!(u, 22.0, epsilon = 1e-12);
        assert!(kept.iter().all(|&k| k));
    }

    #[test]
    fn fence_on_constant_scores_keeps_all() {
        let (u, kept) = outlier_fence(&[3.0; 10]).unwrap();
        assert_eq!(u, 3.0);
        assert!(kept.iter().all(|&k| k));
    }

    #[test]
    fn fence_drops_extreme_outlier() {
        let mut scores: Vec<f64> = (0..100).map(|i| 0.9 * i as f64 / 99.0).collect();
        scores.push(100.0);
        let (u, kept) = outlier_fence(&scores).unwrap();
        assert!(u < 100.0);
        assert_eq!(kept.iter().filter(|&&k| k).count(), 100);
        assert!(!kept[100]);
        // The minimum is never dropped.
        assert!(kept[0]);
    }

    #[test]
    fn acceptance_rate_examples() {
        assert_relative_eq!(acceptance_rate(&[0.1, 0.2, 0.5, 0.29], 0.30).unwrap(), 75.0);
        assert_relative_eq!(acceptance_rate(&[0.0; 8], 0.30).unwrap(), 100.0);
        assert_relative_eq!(acceptance_rate(&[0.3, 0.4, 1.0], 0.30).unwrap(), 0.0);
        assert_eq!(acceptance_rate(&[], 0.30), None);
    }

    #[test]
    fn rel_metrics_ignore_zero_base_rows_but_mae_does_not() {
        let b = vec![10.0, 20.0];
        let mu = vec![12.0, 20.0];
        let rel_before = relative_difference(&b, &mu).unwrap().unwrap();
        let mae_before = mean_absolute_error(&b, &mu).unwrap();
        // Append rows with b = 0, mu = 0: outside RelDiff's domain, inside
        // MAE's denominator.
        let b2 = vec![10.0, 20.0, 0.0, 0.0];
        let mu2 = vec![12.0, 20.0, 0.0, 0.0];
        assert_relative_eq!(relative_difference(&b2, &mu2).unwrap().unwrap(), rel_before);
        assert_relative_eq!(
            acceptance_rate(&[0.2, 0.0], 0.3).unwrap(),
            acceptance_rate(&[0.2, 0.0], 0.3).unwrap()
        );
        assert!(mean_absolute_error(&b2, &mu2).unwrap() < mae_before);
    }

    fn make_exec(id: &str, values: &[u64]) -> ExecutionDataset {
        let mut d = ExecutionDataset::new(id, "INS_MIX");
        d.counter_names = vec!["PAPI_TOT_INS".into()];
        let bursts: Vec<Burst> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut b = Burst::new(
                    0,
                    i as u64 * 100,
                    i as u64 * 100 + 50,
                    CommContext::boundary(),
                    CommContext::boundary(),
                );
                b.seq_index = i;
                b.rel_position = (i + 1) as f64 / values.len() as f64;
                b.counters.insert("PAPI_TOT_INS".into(), v);
                b
            })
            .collect();
        d.ranks.insert(0, bursts);
        d
    }

    fn full_set(execs: &[ExecutionDataset]) -> MatchSet {
        let n = execs[0].ranks[&0].len();
        MatchSet {
            executions: execs.iter().map(|e| e.exec_id.clone()).collect(),
            groups: (0..n)
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
                .collect(),
            unmatched: execs.iter().map(|e| (e.exec_id.clone(), vec![])).collect(),
            stats: None,
        }
    }

    #[test]
    fn identical_copies_validate_perfectly() {
        let a = make_exec("run1", &[10, 20, 30, 40]);
        let mut b = a.clone();
        b.exec_id = "run2".into();
        let mut c = a.clone();
        c.exec_id = "run3".into();
        let execs = [a, b, c];
        let set = full_set(&execs);
        let out = validate(&execs, &set, &ValidationOptions::default()).unwrap();
        let ins = out
            .report
            .features
            .iter()
            .find(|f| f.feature == "PAPI_TOT_INS")
            .unwrap();
        assert_eq!(ins.correlation_mean, Some(1.0));
        assert_eq!(ins.mae, Some(0.0));
        assert_eq!(ins.rel_diff, Some(0.0));
        assert_eq!(ins.acceptance_rate, Some(100.0));
        assert_eq!(ins.samples_kept, 4);
        assert_eq!(ins.samples_dropped, 0);
        // Constant features report n/a, never a fake zero or one.
        let freq = out
            .report
            .features
            .iter()
            .find(|f| f.feature == "frequency")
            .unwrap();
        assert_eq!(freq.rows, 0); // frequency absent in hand-built bursts
        let dur = out
            .report
            .features
            .iter()
            .find(|f| f.feature == "duration_ns")
            .unwrap();
        assert_eq!(
            dur.correlation_mean, None,
            "constant duration has undefined correlation"
        );
        assert_eq!(dur.mae, Some(0.0));
    }

    #[test]
    fn mixed_counter_sets_are_rejected() {
        let a = make_exec("run1", &[1, 2]);
        let mut b = make_exec("run2", &[1, 2]);
        b.counter_set_name = "OPS_SET".into();
        let execs = [a, b];
        let set = full_set(&execs);
        assert!(matches!(
            validate(&execs, &set, &ValidationOptions::default()),
            Err(Error::CounterSetMismatch(_))
        ));
    }

    #[test]
    fn report_renders_paper_style_table() {
        let a = make_exec("run1", &[10, 25, 30, 45]);
        let mut b = a.clone();
        b.exec_id = "run2".into();
        let execs = [a, b];
        let set = full_set(&execs);
        let out = validate(&execs, &set, &ValidationOptions::default()).unwrap();
        let text = render_report(&out.report);
        assert!(text.contains("Correlation"));
        assert!(text.contains("MAE"));
        assert!(text.contains("Rel Diff"));
        assert!(text.contains("<30% Diff"));
        assert!(text.contains("PAPI_TOT_INS"));
    }
}
