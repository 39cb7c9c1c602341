//! Mobile tags: dispersion-based motion classification and range tracking
//! over time from a single long capture.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::FftEngine;
use crate::localizer::{
    fold_range_frequency, fr_to_range, isolate_band, spectrum_with, window_peak, ExtractOptions, Spectrum, TagDetection,
};
use crate::scalar::Real;
use crate::waveform::{IqSignal, RadarConfig};

/// Dispersion at or above which a tag counts as moving.
pub const MOBILE_THRESHOLD_HZ: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub t_s: f64,
    pub range_m: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub tag_id: Option<String>,
    pub samples: Vec<TrackSample>,
    pub update_interval_chirps: usize,
}

impl Track {
    /// Least-squares slope of range against time.
    pub fn fitted_velocity_mps(&self) -> Option<f64> {
        let n = self.samples.len() as f64;
        if self.samples.len() < 2 {
            return None;
        }
        let mt = self.samples.iter().map(|s| s.t_s).sum::<f64>() / n;
        let mr = self.samples.iter().map(|s| s.range_m).sum::<f64>() / n;
        let (num, den) = self.samples.iter().fold((0.0, 0.0), |(a, b), s| {
            (a + (s.t_s - mt) * (s.range_m - mr), b + (s.t_s - mt).powi(2))
        });
        (den > 0.0).then(|| num / den)
    }

    /// Update rate in Hz.
    pub fn update_rate_hz(&self, cfg: &RadarConfig) -> f64 {
        1.0 / (self.update_interval_chirps as f64 * (cfg.chirp_duration_s + cfg.interchirp_gap_s))
    }

    /// Writes `t_s,range_m,snr_db` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_s,range_m,snr_db")?;
        for s in &self.samples {
            writeln!(out, "{},{},{}", s.t_s, s.range_m, s.snr_db)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct TrackOptions {
    pub extract: ExtractOptions,
    /// Residues kept on each side of the tag's residue. Defaults to the
    /// widest band that stays clear of the clutter grid.
    pub band_half_width: Option<usize>,
    /// Full apparent modulation frequency, used to undo the integer number
    /// of grid lines between the tag's comb and its residue. Without it the
    /// residue alone is assumed.
    pub fm_hz: Option<f64>,
}

fn band_width(n: usize, q: usize, cap: Option<usize>) -> usize {
    let w = q.min(n - q).saturating_sub(1);
    cap.map_or(w, |c| w.min(c))
}

/// Band half-width for the tag at residue `q` that stays clear of every
/// other detected residue, or `None` when it is the only detection.
pub fn isolation_half_width(detections: &[TagDetection], q: usize, n: usize) -> Option<usize> {
    detections
        .iter()
        .filter(|d| d.offset_bins != q)
        .map(|d| {
            let gap = (d.offset_bins + n - q) % n;
            gap.min(n - gap)
        })
        .min()
        .map(|gap| (gap.saturating_sub(1) / 2).max(1))
}

fn check_detection<T: Real>(spec: &Spectrum<T>, det: &TagDetection) -> Result<()> {
    let n = spec.grid_stride();
    if det.offset_bins == 0 || det.offset_bins >= n {
        return Err(Error::Precondition(format!(
            "tag offset must lie strictly between 0 and {n} bins, got {}",
            det.offset_bins
        )));
    }
    Ok(())
}

/// Full -3 dB width of a rectangular-window main lobe, in bins.
const REFERENCE_WIDTH_BINS: f64 = 0.885_892_9;
/// Bins on either side used to interpolate between DFT bins.
const INTERP_HALF_SPAN: isize = 256;
/// Search step of the interpolated spectrum, in bins.
const FINE_STEP: f64 = 1.0 / 16.0;

/// Spectrum of a length-`M` signal at fractional bin `pos`, rebuilt from its
/// unitary DFT bins by Dirichlet-kernel interpolation over nearby bins.
fn interpolated_power(bins: &[Complex<f64>], pos: f64) -> f64 {
    let m = bins.len() as f64;
    let len = bins.len() as isize;
    let centre = pos.round() as isize;
    let mut acc = Complex::new(0.0, 0.0);
    for k in centre - INTERP_HALF_SPAN..=centre + INTERP_HALF_SPAN {
        let x = bins[k.rem_euclid(len) as usize];
        if x.re == 0.0 && x.im == 0.0 {
            continue;
        }
        let y = k as f64 - pos;
        let kernel = if y.abs() < 1e-12 {
            Complex::new(1.0, 0.0)
        } else {
            let mag = (PI * y).sin() / (m * (PI * y / m).sin());
            Complex::from_polar(mag, PI * y * (m - 1.0) / m)
        };
        acc += x * kernel;
    }
    acc.norm_sqr()
}

fn bisect(f: impl Fn(f64) -> f64, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..40 {
        let mid = 0.5 * (inside + outside);
        if f(mid) >= 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// Broadening of the tag's strongest spectral line: its -3 dB width on the
/// interpolated spectrum minus the width of a steady tone. Zero for a
/// static tag.
pub fn dispersion_hz<T: Real>(spec: &Spectrum<T>, det: &TagDetection) -> f64 {
    dispersion_hz_with(spec, det, None)
}

pub fn dispersion_hz_with<T: Real>(spec: &Spectrum<T>, det: &TagDetection, band_half_width: Option<usize>) -> f64 {
    if check_detection(spec, det).is_err() {
        return 0.0;
    }
    let n = spec.grid_stride();
    let w = band_width(n, det.offset_bins, band_half_width);
    let band = isolate_band(spec, det.offset_bins, w);
    let bins: Vec<Complex<f64>> = band
        .bins()
        .iter()
        .map(|z| Complex::new(z.re.as_f64(), z.im.as_f64()))
        .collect();
    let Some((peak_bin, _)) = bins
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()).then(b.0.cmp(&a.0)))
    else {
        return 0.0;
    };
    let p = |x: f64| interpolated_power(&bins, x);
    let c = peak_bin as f64;
    if !(p(c) > 0.0) {
        return 0.0;
    }

    // locate the continuous maximum near the strongest bin
    let mut best = c;
    let mut x = c - 1.0;
    while x <= c + 1.0 {
        if p(x) > p(best) {
            best = x;
        }
        x += FINE_STEP;
    }
    let (mut lo, mut hi) = (best - FINE_STEP, best + FINE_STEP);
    for _ in 0..40 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if p(a) < p(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let peak_pos = 0.5 * (lo + hi);
    let half = p(peak_pos) / 2.0;
    let above = |x: f64| p(x) - half;

    // outermost points still above half power, searched within the band
    let reach = (w as f64 + 0.5).min(INTERP_HALF_SPAN as f64 / 2.0);
    let outermost = |dir: f64| -> f64 {
        let mut last_inside = peak_pos;
        let mut x = peak_pos + dir * FINE_STEP;
        while (x - peak_pos).abs() <= reach {
            if above(x) >= 0.0 {
                last_inside = x;
            }
            x += dir * FINE_STEP;
        }
        bisect(above, last_inside, last_inside + dir * FINE_STEP)
    };
    let width = outermost(1.0) - outermost(-1.0);
    ((width - REFERENCE_WIDTH_BINS) * spec.bin_spacing_hz() * spec.offset_scale()).max(0.0)
}

pub fn classify_mobile(disp_hz: f64) -> bool {
    classify_mobile_with(disp_hz, MOBILE_THRESHOLD_HZ)
}

pub fn classify_mobile_with(disp_hz: f64, threshold_hz: f64) -> bool {
    disp_hz >= threshold_hz
}

/// Range over time from one capture, one chirp-long window every
/// `update_interval_chirps` chirps.
pub fn track<T: Real>(
    sig: &IqSignal<T>,
    cfg: &RadarConfig,
    det: &TagDetection,
    update_interval_chirps: usize,
) -> Result<Track> {
    let engine = FftEngine::new();
    let spec = spectrum_with(&engine, sig, cfg)?;
    track_spectrum(
        &engine,
        &spec,
        cfg,
        det,
        update_interval_chirps,
        &TrackOptions::default(),
    )
}

pub fn track_with<T: Real>(
    sig: &IqSignal<T>,
    cfg: &RadarConfig,
    det: &TagDetection,
    update_interval_chirps: usize,
    opts: &TrackOptions,
) -> Result<Track> {
    let engine = FftEngine::new();
    let spec = spectrum_with(&engine, sig, cfg)?;
    track_spectrum(&engine, &spec, cfg, det, update_interval_chirps, opts)
}

/// [`track_with`] on an already computed symbol spectrum.
pub fn track_in_spectrum<T: Real>(
    spec: &Spectrum<T>,
    cfg: &RadarConfig,
    det: &TagDetection,
    update_interval_chirps: usize,
    opts: &TrackOptions,
) -> Result<Track> {
    track_spectrum(&FftEngine::new(), spec, cfg, det, update_interval_chirps, opts)
}

pub(crate) fn track_spectrum<T: Real>(
    engine: &FftEngine<T>,
    spec: &Spectrum<T>,
    cfg: &RadarConfig,
    det: &TagDetection,
    stride: usize,
    opts: &TrackOptions,
) -> Result<Track> {
    let n = cfg.num_chirps;
    if stride == 0 || stride > n {
        return Err(Error::Config(format!(
            "update interval must be between 1 and {n} chirps, got {stride}"
        )));
    }
    check_detection(spec, det)?;
    let q = det.offset_bins;
    let l = cfg.samples_per_chirp();
    let fs = cfg.sample_rate_hz;
    let t = cfg.chirp_duration_s;
    let bs = cfg.bin_spacing_hz();
    let band = isolate_band(spec, q, band_width(n, q, opts.band_half_width));
    let mut time = band.bins().to_vec();
    engine.inverse_unitary(&mut time);

    let shift = det.fine_offset_bins() * bs;
    let k = opts
        .fm_hz
        .map_or(0.0, |f| ((f * cfg.gap_stretch() - shift) * t).round());
    let first = (stride / 2).min(n - 1);
    let starts: Vec<usize> = (first..n).step_by(stride).collect();
    let period = t + cfg.interchirp_gap_s;

    let samples = starts
        .par_iter()
        .map(|&c| {
            let window = &time[c * l..(c + 1) * l];
            let peak = window_peak(engine, window, fs, &opts.extract)?;
            let fr = fold_range_frequency(peak.freq_hz - k / t - det.fraction_bins * bs, fs);
            Ok(TrackSample {
                t_s: c as f64 * period + t / 2.0,
                range_m: fr_to_range(fr, cfg)?,
                snr_db: peak.snr_db,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Track {
        tag_id: None,
        samples,
        update_interval_chirps: stride,
    })
}
