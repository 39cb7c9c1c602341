//! Error statistics for a run.
//!
//! Percentiles use linear interpolation between order statistics with the
//! inclusive convention: for `n` sorted values the `p`-quantile sits at
//! fractional index `h = (n - 1) p`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::run::{BaselineRow, MobilityRow, PositionRow, ResultRow};

/// Inclusive linear-interpolation quantile of already sorted values.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub p10_m: f64,
    pub p25_m: f64,
    pub median_m: f64,
    pub p75_m: f64,
    pub p90_m: f64,
    pub mean_m: f64,
    pub max_m: f64,
}

impl ErrorStats {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v = sorted(values);
        if v.is_empty() {
            return None;
        }
        Some(Self {
            count: v.len(),
            p10_m: percentile(&v, 0.10),
            p25_m: percentile(&v, 0.25),
            median_m: percentile(&v, 0.50),
            p75_m: percentile(&v, 0.75),
            p90_m: percentile(&v, 0.90),
            mean_m: v.iter().sum::<f64>() / v.len() as f64,
            max_m: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error_m: f64,
    pub probability: f64,
}

/// The error quantiles at every whole percent.
pub fn cdf_samples(values: impl IntoIterator<Item = f64>) -> Vec<CdfPoint> {
    let v = sorted(values);
    if v.is_empty() {
        return Vec::new();
    }
    (0..=100)
        .map(|k| {
            let p = k as f64 / 100.0;
            CdfPoint {
                error_m: percentile(&v, p),
                probability: p,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagMetrics {
    pub tag_id: String,
    pub expected: usize,
    pub detected: usize,
    pub detection_rate: f64,
    pub range_error: Option<ErrorStats>,
    pub position_error: Option<ErrorStats>,
    /// Fraction of tracked captures in which the tag was classified mobile.
    pub mobile_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub error: ErrorStats,
    pub hawkeye_median_m: f64,
    /// Baseline median error over the pipeline's median error.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub error: String,
}

/// Wall-clock seconds per stage, summed over trials. Kept out of
/// `metrics.json` so reruns stay byte-identical.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub simulate_s: f64,
    pub localize_s: f64,
    pub track_s: f64,
    pub geometry_s: f64,
    pub total_s: f64,
}

impl StageTiming {
    pub fn add(&mut self, other: &StageTiming) {
        self.simulate_s += other.simulate_s;
        self.localize_s += other.localize_s;
        self.track_s += other.track_s;
        self.geometry_s += other.geometry_s;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: u64,
    pub trials: usize,
    pub failed_trials: Vec<TrialFailure>,
    /// Tag and radar pairs that should have produced a range.
    pub expected: usize,
    pub detected: usize,
    /// Detections that matched no tag in the scene.
    pub false_detections: usize,
    pub detection_rate: f64,
    pub range_error: Option<ErrorStats>,
    pub range_cdf: Vec<CdfPoint>,
    pub position_error: Option<ErrorStats>,
    pub position_cdf: Vec<CdfPoint>,
    pub per_tag: Vec<TagMetrics>,
    pub baseline: Option<BaselineSummary>,
    #[serde(skip)]
    pub timing: StageTiming,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub struct MetricsInput<'a> {
    pub scenario: &'a str,
    pub seed: u64,
    pub trials: usize,
    pub failed_trials: Vec<TrialFailure>,
    pub rows: &'a [ResultRow],
    pub positions: &'a [PositionRow],
    pub baseline: &'a [BaselineRow],
    pub mobility: &'a [MobilityRow],
    pub timing: StageTiming,
}

impl MetricsReport {
    pub fn compute(input: MetricsInput<'_>) -> Self {
        let truth_rows: Vec<&ResultRow> = input.rows.iter().filter(|r| r.true_range_m.is_some()).collect();
        let expected = truth_rows.len();
        let detected = truth_rows.iter().filter(|r| r.detected).count();
        let false_detections = input.rows.iter().filter(|r| r.true_range_m.is_none()).count();
        let errors = || truth_rows.iter().filter_map(|r| r.error_m);
        let pos_errors = || input.positions.iter().filter_map(|p| p.error_m);

        let mut tags: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
        for r in &truth_rows {
            tags.entry(r.tag_id.as_str()).or_default().push(r);
        }
        let per_tag = tags
            .into_iter()
            .map(|(id, rows)| {
                let det = rows.iter().filter(|r| r.detected).count();
                let mob: Vec<&MobilityRow> = input.mobility.iter().filter(|m| m.tag_id == id).collect();
                TagMetrics {
                    tag_id: id.to_string(),
                    expected: rows.len(),
                    detected: det,
                    detection_rate: rate(det, rows.len()),
                    range_error: ErrorStats::from_values(rows.iter().filter_map(|r| r.error_m)),
                    position_error: ErrorStats::from_values(
                        input
                            .positions
                            .iter()
                            .filter(|p| p.tag_id == id)
                            .filter_map(|p| p.error_m),
                    ),
                    mobile_fraction: (!mob.is_empty())
                        .then(|| rate(mob.iter().filter(|m| m.mobile).count(), mob.len())),
                }
            })
            .collect();

        let range_error = ErrorStats::from_values(errors());
        let baseline = ErrorStats::from_values(input.baseline.iter().map(|b| b.error_m)).and_then(|error| {
            let hawkeye = range_error.as_ref()?.median_m;
            Some(BaselineSummary {
                ratio: if hawkeye > 0.0 {
                    error.median_m / hawkeye
                } else {
                    f64::INFINITY
                },
                hawkeye_median_m: hawkeye,
                error,
            })
        });

        Self {
            scenario: input.scenario.to_string(),
            seed: input.seed,
            trials: input.trials,
            failed_trials: input.failed_trials,
            expected,
            detected,
            false_detections,
            detection_rate: rate(detected, expected),
            range_cdf: cdf_samples(errors()),
            range_error,
            position_error: ErrorStats::from_values(pos_errors()),
            position_cdf: cdf_samples(pos_errors()),
            per_tag,
            baseline,
            timing: input.timing,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_between_order_statistics() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert!((percentile(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((percentile(&v, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn stats_are_monotone() {
        let s = ErrorStats::from_values([0.3, 0.1, 0.9, 0.4, 0.0, 2.0]).unwrap();
        let seq = [s.p10_m, s.p25_m, s.median_m, s.p75_m, s.p90_m, s.max_m];
        assert!(seq.windows(2).all(|w| w[0] <= w[1]), "{seq:?}");
        assert!(ErrorStats::from_values([]).is_none());
    }

    #[test]
    fn cdf_has_one_sample_per_percent() {
        let c = cdf_samples([3.0, 1.0, 2.0]);
        assert_eq!(c.len(), 101);
        assert!(c
            .windows(2)
            .all(|w| w[0].error_m <= w[1].error_m && w[0].probability < w[1].probability));
        assert_eq!(c[50].error_m, 2.0);
    }
}
