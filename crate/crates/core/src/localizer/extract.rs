use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::detect::TagDetection;
use super::spectrum::Spectrum;
use crate::error::{Error, Result};
use crate::fft::FftEngine;
use crate::scalar::Real;
use crate::waveform::RadarConfig;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    /// Zero-padded DFT length as a multiple of the chirp length.
    pub pad_factor: usize,
    /// Parabolic interpolation of the log-magnitude peak.
    pub refine: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            pad_factor: 128,
            refine: true,
        }
    }
}

/// Nulls the clutter grid and moves the tag's residue onto it.
pub fn isolate_tag<T: Real>(spec: &Spectrum<T>, det: &TagDetection) -> Result<Spectrum<T>> {
    let n = spec.grid_stride();
    let q = det.offset_bins;
    if q == 0 || q >= n {
        return Err(Error::Precondition(format!(
            "tag offset must lie strictly between 0 and {n} bins, got {q}"
        )));
    }
    let mut bins = vec![Complex::new(T::zero(), T::zero()); spec.len()];
    for (k, v) in spec.grid_values(q).into_iter().enumerate() {
        bins[k * n] = v;
    }
    Ok(spec.with_bins(bins))
}

/// Keeps residues `q - w ..= q + w` (never residue 0) and shifts them down
/// by `q`, so a tag whose comb is smeared by motion stays intact.
pub(crate) fn isolate_band<T: Real>(spec: &Spectrum<T>, q: usize, w: usize) -> Spectrum<T> {
    let n = spec.grid_stride();
    let len = spec.len();
    let mut bins = vec![Complex::new(T::zero(), T::zero()); len];
    for (k, v) in spec.bins().iter().enumerate() {
        let r = k % n;
        let d = (r as isize - q as isize).rem_euclid(n as isize) as usize;
        let d = if d > n / 2 { d as isize - n as isize } else { d as isize };
        if r != 0 && d.unsigned_abs() <= w {
            bins[(k + len - q) % len] = *v;
        }
    }
    spec.with_bins(bins)
}

/// Peak of the zero-padded DFT of one chirp-length window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct WindowPeak {
    pub freq_hz: f64,
    pub snr_db: f64,
}

pub(crate) fn window_peak<T: Real>(
    engine: &FftEngine<T>,
    window: &[Complex<T>],
    sample_rate_hz: f64,
    opts: &ExtractOptions,
) -> Result<WindowPeak> {
    let l = window.len();
    let p = l * opts.pad_factor.max(1);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); p];
    buf[..l].copy_from_slice(window);
    engine.forward(p).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|z| z.norm_sqr().as_f64()).collect();
    let (k, &peak) = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty window");
    if !(peak > 0.0) {
        return Err(Error::NoSignal);
    }
    let mut delta = 0.0;
    if opts.refine && p >= 3 {
        let a = power[(k + p - 1) % p];
        let c = power[(k + 1) % p];
        if a > 0.0 && c > 0.0 {
            // log of power is twice log-magnitude; the vertex is unchanged
            let (la, lb, lc) = (a.ln(), peak.ln(), c.ln());
            let den = la - 2.0 * lb + lc;
            if den < 0.0 {
                delta = (0.5 * (la - lc) / den).clamp(-0.5, 0.5);
            }
        }
    }
    let mut sorted = power;
    let mid = sorted.len() / 2;
    let (_, median, _) = sorted.select_nth_unstable_by(mid, f64::total_cmp);
    let snr_db = 10.0 * (peak / median.max(1e-300)).log10();
    let freq_hz = ((k as f64 + delta) * sample_rate_hz / p as f64).rem_euclid(sample_rate_hz);
    Ok(WindowPeak { freq_hz, snr_db })
}

/// Time-domain window of one chirp period from a spectrum. Grid-only
/// spectra are exactly `T`-periodic, so an `L`-point inverse DFT of the grid
/// bins is used; anything else goes through the full inverse DFT and the
/// middle chirp.
pub(crate) fn chirp_window<T: Real>(engine: &FftEngine<T>, spec: &Spectrum<T>) -> Vec<Complex<T>> {
    let n = spec.grid_stride();
    let l = spec.samples_per_chirp();
    let grid_only = spec
        .bins()
        .iter()
        .enumerate()
        .all(|(k, z)| k % n == 0 || (z.re == T::zero() && z.im == T::zero()));
    if grid_only {
        let mut g = spec.grid_values(0);
        engine.inverse_unitary(&mut g);
        g
    } else {
        let mut full = spec.bins().to_vec();
        engine.inverse_unitary(&mut full);
        let start = (n / 2) * l;
        full[start..start + l].to_vec()
    }
}

pub(crate) fn extract_with_engine<T: Real>(
    engine: &FftEngine<T>,
    clean: &Spectrum<T>,
    cfg: &RadarConfig,
    opts: &ExtractOptions,
) -> Result<f64> {
    clean.check_against(cfg)?;
    if clean.bins().iter().all(|z| z.re == T::zero() && z.im == T::zero()) {
        return Err(Error::NoSignal);
    }
    let window = chirp_window(engine, clean);
    Ok(window_peak(engine, &window, clean.sample_rate_hz(), opts)?.freq_hz)
}

/// Centre of the sinc envelope of an isolated tag, in `[0, f_s)`, with
/// parabolic refinement.
pub fn extract_fr<T: Real>(clean: &Spectrum<T>, cfg: &RadarConfig, pad_factor: usize) -> Result<f64> {
    extract_fr_with(
        clean,
        cfg,
        &ExtractOptions {
            pad_factor,
            refine: true,
        },
    )
}

pub fn extract_fr_with<T: Real>(clean: &Spectrum<T>, cfg: &RadarConfig, opts: &ExtractOptions) -> Result<f64> {
    extract_with_engine(&FftEngine::new(), clean, cfg, opts)
}

/// `R = c f_r T / (2B)`.
pub fn fr_to_range(fr_hz: f64, cfg: &RadarConfig) -> Result<f64> {
    let limit = cfg.sample_rate_hz / 2.0;
    if !(fr_hz >= 0.0) {
        return Err(Error::Precondition(format!(
            "range frequency must be >= 0, got {fr_hz}"
        )));
    }
    if fr_hz >= limit {
        return Err(Error::AmbiguousRange {
            reflector: "estimate".into(),
            fr_hz,
            limit_hz: limit,
        });
    }
    Ok(SPEED_OF_LIGHT * fr_hz * cfg.chirp_duration_s / (2.0 * cfg.bandwidth_hz))
}

/// Wraps a frequency into `[-f_s/2, f_s/2)` and clamps negatives to zero.
pub(crate) fn fold_range_frequency(f: f64, fs: f64) -> f64 {
    let w = (f + fs / 2.0).rem_euclid(fs) - fs / 2.0;
    w.max(0.0)
}
