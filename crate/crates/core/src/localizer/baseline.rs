//! Conventional single-chirp FMCW ranging, for comparison.

use std::f64::consts::PI;

use num_complex::Complex;

use super::extract::fr_to_range;
use crate::error::{Error, Result};
use crate::fft::FftEngine;
use crate::scalar::Real;
use crate::waveform::{IqSignal, RadarConfig};

fn first_chirp<T: Real>(sig: &IqSignal<T>, cfg: &RadarConfig) -> Result<Vec<Complex<T>>> {
    cfg.validate()?;
    let l = cfg.samples_per_chirp();
    if sig.len() < l {
        return Err(Error::Structure(format!(
            "baseline needs one chirp of {l} samples, got {}",
            sig.len()
        )));
    }
    Ok(sig.samples()[..l].to_vec())
}

fn argmax_range<T: Real>(mut chirp: Vec<Complex<T>>, cfg: &RadarConfig) -> Result<f64> {
    let l = chirp.len();
    FftEngine::new().forward(l).process(&mut chirp);
    let k = chirp[..l.div_ceil(2)]
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.norm_sqr()
                .as_f64()
                .total_cmp(&b.1.norm_sqr().as_f64())
                .then(b.0.cmp(&a.0))
        })
        .map(|(k, _)| k)
        .unwrap_or(0);
    fr_to_range(k as f64 * cfg.sample_rate_hz / l as f64, cfg)
}

/// Range from the strongest bin of a single un-padded chirp FFT. Its
/// resolution is the FMCW range quantum `c / (2B)`.
pub fn baseline_fmcw_range<T: Real>(sig: &IqSignal<T>, cfg: &RadarConfig) -> Result<f64> {
    argmax_range(first_chirp(sig, cfg)?, cfg)
}

/// As [`baseline_fmcw_range`], after removing a known tag modulation
/// frequency so the tag's beat tone sits at its range frequency.
pub fn baseline_fmcw_range_demod<T: Real>(sig: &IqSignal<T>, cfg: &RadarConfig, fm_hz: f64) -> Result<f64> {
    let fs = sig.sample_rate_hz();
    let t0 = sig.t0_s();
    let chirp = first_chirp(sig, cfg)?
        .into_iter()
        .enumerate()
        .map(|(i, z)| {
            let cycles = (fm_hz * (t0 + i as f64 / fs)).rem_euclid(1.0);
            let (s, c) = (-2.0 * PI * cycles).sin_cos();
            z * Complex::new(T::lit(c), T::lit(s))
        })
        .collect();
    argmax_range(chirp, cfg)
}
