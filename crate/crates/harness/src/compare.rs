//! Paired comparison against the single-chirp FMCW baseline.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::run::run_scenario;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub scenario: String,
    pub samples: usize,
    pub baseline_median_m: f64,
    pub hawkeye_refined_median_m: f64,
    pub hawkeye_unrefined_median_m: f64,
    /// Baseline median over the refined pipeline's median.
    pub ratio_refined: f64,
    pub ratio_unrefined: f64,
}

/// Runs the scenario with and without peak refinement, with the baseline
/// evaluated on the same captures, and reports median-error ratios.
pub fn compare_baseline(sc: &Scenario) -> Result<BaselineReport> {
    let mut on = sc.clone();
    on.pipeline.baseline = true;
    on.pipeline.refine = true;
    let mut off = sc.clone();
    off.pipeline.baseline = false;
    off.pipeline.refine = false;

    let refined = run_scenario(&on)?.metrics;
    let unrefined = run_scenario(&off)?.metrics;
    let base = refined
        .baseline
        .as_ref()
        .ok_or_else(|| invalid("scene.tags", "no tag produced both a baseline and a pipeline estimate"))?;
    let median = |m: &crate::metrics::MetricsReport| {
        m.range_error
            .as_ref()
            .map(|s| s.median_m)
            .ok_or_else(|| invalid("scene.tags", "no tag was detected"))
    };
    let (r, u) = (median(&refined)?, median(&unrefined)?);
    Ok(BaselineReport {
        scenario: sc.name.clone(),
        samples: base.error.count,
        baseline_median_m: base.error.median_m,
        hawkeye_refined_median_m: r,
        hawkeye_unrefined_median_m: u,
        ratio_refined: base.error.median_m / r,
        ratio_unrefined: base.error.median_m / u,
    })
}
