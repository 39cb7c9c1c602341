use serde::{Deserialize, Serialize};

use super::spectrum::Spectrum;
use crate::scalar::Real;

/// A modulated return found at a residue off the clutter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagDetection {
    /// Residue modulo the grid stride, in `1..grid_stride`.
    pub offset_bins: usize,
    /// Sub-bin correction in bins, in `(-1, 1)`; zero unless sub-bin
    /// refinement was requested.
    #[serde(default)]
    pub fraction_bins: f64,
    /// Modulation offset from the nearest grid line, in Hz on the physical
    /// (gap-corrected) timeline.
    pub offset_hz: f64,
    /// Folded power of the residue, dB.
    pub power_db: f64,
    /// Folded power over the median residue power, dB.
    pub snr_db: f64,
}

impl TagDetection {
    /// Detection record for residue `q` of `spec`, regardless of whether it
    /// would pass the detector.
    pub fn at_residue<T: Real>(spec: &Spectrum<T>, q: usize) -> Self {
        let folded = spec.folded_powers();
        let floor = median_floor(&folded);
        let p = folded.get(q).copied().unwrap_or(0.0);
        Self {
            offset_bins: q,
            fraction_bins: 0.0,
            offset_hz: q as f64 * spec.bin_spacing_hz() * spec.offset_scale(),
            power_db: to_db(p),
            snr_db: to_db(p) - to_db(floor),
        }
    }

    /// Residue including the sub-bin correction.
    pub fn fine_offset_bins(&self) -> f64 {
        self.offset_bins as f64 + self.fraction_bins
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectOptions {
    /// Margin above the median residue power a residue must clear.
    pub min_snr_db: f64,
    /// Residues weaker than the strongest one by more than this are ignored.
    pub dynamic_range_db: f64,
    /// Estimate the modulation frequency between bins from the stronger
    /// neighbouring residue.
    pub subbin_refine: bool,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            min_snr_db: 10.0,
            dynamic_range_db: 100.0,
            subbin_refine: false,
        }
    }
}

fn to_db(p: f64) -> f64 {
    10.0 * p.max(1e-300).log10()
}

fn median_floor(folded: &[f64]) -> f64 {
    let mut v: Vec<f64> = folded.iter().skip(1).copied().collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Finds tag modulation offsets with the default dynamic-range limit.
pub fn detect_fm<T: Real>(spec: &Spectrum<T>, min_snr_db: f64) -> Vec<TagDetection> {
    detect_fm_with(
        spec,
        &DetectOptions {
            min_snr_db,
            ..DetectOptions::default()
        },
    )
}

/// Folds bin power modulo the grid stride and reports every off-grid
/// residue that is a local maximum and clears the median floor by the
/// requested margin, strongest first.
pub fn detect_fm_with<T: Real>(spec: &Spectrum<T>, opts: &DetectOptions) -> Vec<TagDetection> {
    let n = spec.grid_stride();
    if n < 2 {
        return Vec::new();
    }
    let folded = spec.folded_powers();
    let floor = median_floor(&folded);
    let strongest = folded.iter().skip(1).copied().fold(0.0, f64::max);
    if strongest <= 0.0 {
        return Vec::new();
    }
    let threshold =
        (floor * 10f64.powf(opts.min_snr_db / 10.0)).max(strongest * 10f64.powf(-opts.dynamic_range_db / 10.0));
    // residue 0 belongs to the clutter, so neighbours step over it
    let neighbour = |q: usize, step: isize| -> Option<f64> {
        let mut j = (q as isize + step).rem_euclid(n as isize) as usize;
        if j == 0 {
            j = step.rem_euclid(n as isize) as usize;
        }
        (j != q).then(|| folded[j])
    };

    let mut out: Vec<TagDetection> = (1..n)
        .filter(|&q| {
            let p = folded[q];
            p > threshold && neighbour(q, -1).is_none_or(|l| p > l) && neighbour(q, 1).is_none_or(|r| p >= r)
        })
        .map(|q| {
            let p = folded[q];
            let fraction_bins = if opts.subbin_refine {
                let l = neighbour(q, -1).unwrap_or(0.0).sqrt();
                let r = neighbour(q, 1).unwrap_or(0.0).sqrt();
                let a = p.sqrt();
                if r >= l {
                    r / (a + r)
                } else {
                    -l / (a + l)
                }
            } else {
                0.0
            };
            TagDetection {
                offset_bins: q,
                fraction_bins,
                offset_hz: (q as f64 + fraction_bins) * spec.bin_spacing_hz() * spec.offset_scale(),
                power_db: to_db(p),
                snr_db: to_db(p) - to_db(floor),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.power_db
            .total_cmp(&a.power_db)
            .then(a.offset_bins.cmp(&b.offset_bins))
    });
    out
}
