//! Chirp and HD-FMCW interrogation synthesis.
//!
//! Chirps are generated at complex baseband sweeping `0 -> B`; the carrier
//! only enters the channel model analytically. Every chirp starts at phase
//! zero, so an `N`-chirp symbol is exactly periodic with `T` on the sample
//! grid.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::SPEED_OF_LIGHT;

/// Relative tolerance when checking that a duration is a whole number of
/// samples.
const SAMPLE_GRID_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub chirp_duration_s: f64,
    pub sample_rate_hz: f64,
    pub num_chirps: usize,
    #[serde(default)]
    pub interchirp_gap_s: f64,
    #[serde(default)]
    pub tx_power_dbm: f64,
}

impl RadarConfig {
    /// 24 GHz defaults used by the reader prototypes: 250 MHz sweep,
    /// 1 MHz IF sampling, 8192 samples per chirp, 2048 chirps.
    pub fn tinyrad_24ghz() -> Self {
        Self {
            carrier_hz: 24.0e9,
            bandwidth_hz: 250.0e6,
            chirp_duration_s: 8.192e-3,
            sample_rate_hz: 1.0e6,
            num_chirps: 2048,
            interchirp_gap_s: 0.0,
            tx_power_dbm: 8.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return bad(format!("bandwidth must be positive, got {}", self.bandwidth_hz));
        }
        if !(self.chirp_duration_s > 0.0 && self.chirp_duration_s.is_finite()) {
            return bad(format!(
                "chirp duration must be positive, got {}",
                self.chirp_duration_s
            ));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate_hz));
        }
        if !self.carrier_hz.is_finite() || self.carrier_hz < 0.0 {
            return bad(format!("carrier must be finite and >= 0, got {}", self.carrier_hz));
        }
        if self.num_chirps == 0 {
            return bad("num_chirps must be at least 1".into());
        }
        if !(self.interchirp_gap_s >= 0.0 && self.interchirp_gap_s.is_finite()) {
            return bad(format!("inter-chirp gap must be >= 0, got {}", self.interchirp_gap_s));
        }
        whole_samples(self.chirp_duration_s * self.sample_rate_hz).ok_or_else(|| {
            Error::Config(format!(
                "chirp duration x sample rate = {} is not an integer sample count",
                self.chirp_duration_s * self.sample_rate_hz
            ))
        })?;
        whole_samples(self.interchirp_gap_s * self.sample_rate_hz).ok_or_else(|| {
            Error::Config(format!(
                "inter-chirp gap x sample rate = {} is not an integer sample count",
                self.interchirp_gap_s * self.sample_rate_hz
            ))
        })?;
        let slope = self.slope_hz_per_s();
        if !(slope.is_finite() && slope > 0.0) {
            return bad(format!("chirp slope {slope} is not finite and positive"));
        }
        Ok(())
    }

    /// `L = T * f_s`. Assumes a validated config.
    pub fn samples_per_chirp(&self) -> usize {
        (self.chirp_duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn gap_samples(&self) -> usize {
        (self.interchirp_gap_s * self.sample_rate_hz).round() as usize
    }

    /// Length of the gap-free symbol, `N * L`.
    pub fn symbol_len(&self) -> usize {
        self.num_chirps * self.samples_per_chirp()
    }

    /// `S = B / T`.
    pub fn slope_hz_per_s(&self) -> f64 {
        self.bandwidth_hz / self.chirp_duration_s
    }

    /// Spacing of the clutter grid, `1/T`.
    pub fn grid_spacing_hz(&self) -> f64 {
        1.0 / self.chirp_duration_s
    }

    /// DFT bin spacing of the full symbol, `1/(N T)`.
    pub fn bin_spacing_hz(&self) -> f64 {
        1.0 / (self.num_chirps as f64 * self.chirp_duration_s)
    }

    /// Conventional FMCW range resolution `c / (2B)`.
    pub fn range_resolution_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    /// Range frequency of a reflector at one-way range `range_m`.
    pub fn range_frequency_hz(&self, range_m: f64) -> f64 {
        2.0 * range_m * self.slope_hz_per_s() / SPEED_OF_LIGHT
    }

    /// Largest unambiguous range, where `f_r` reaches `f_s / 2`.
    pub fn max_range_m(&self) -> f64 {
        SPEED_OF_LIGHT * self.sample_rate_hz / (4.0 * self.slope_hz_per_s())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Ratio by which gap removal stretches a tag's modulation frequency,
    /// `(T + g) / T`.
    pub fn gap_stretch(&self) -> f64 {
        (self.chirp_duration_s + self.interchirp_gap_s) / self.chirp_duration_s
    }
}

fn whole_samples(x: f64) -> Option<usize> {
    let r = x.round();
    if (r >= 1.0 - f64::EPSILON || x == 0.0) && (x - r).abs() <= SAMPLE_GRID_TOL * r.max(1.0) {
        return Some(r as usize);
    }
    None
}

/// Uniformly sampled complex baseband buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct IqSignal<T: Real = f64> {
    samples: Vec<Complex<T>>,
    sample_rate_hz: f64,
    t0_s: f64,
}

impl<T: Real> IqSignal<T> {
    pub fn new(samples: Vec<Complex<T>>, sample_rate_hz: f64, t0_s: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Structure("signal must contain at least one sample".into()));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::Structure(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            t0_s,
        })
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn t0_s(&self) -> f64 {
        self.t0_s
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Sum of `|x|^2`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr().as_f64()).sum()
    }

    pub fn mean_power(&self) -> f64 {
        self.energy() / self.samples.len() as f64
    }

    /// Converts the sample type, e.g. to run the pipeline in `f32`.
    pub fn cast<U: Real>(&self) -> IqSignal<U> {
        IqSignal {
            samples: self
                .samples
                .iter()
                .map(|z| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64())))
                .collect(),
            sample_rate_hz: self.sample_rate_hz,
            t0_s: self.t0_s,
        }
    }
}

/// One chirp of `T * f_s` samples with phase `pi * S * t^2`.
pub fn synth_chirp<T: Real>(cfg: &RadarConfig) -> Result<IqSignal<T>> {
    cfg.validate()?;
    Ok(IqSignal {
        samples: chirp_samples(cfg),
        sample_rate_hz: cfg.sample_rate_hz,
        t0_s: 0.0,
    })
}

fn chirp_samples<T: Real>(cfg: &RadarConfig) -> Vec<Complex<T>> {
    let half_slope = 0.5 * cfg.slope_hz_per_s();
    (0..cfg.samples_per_chirp())
        .map(|n| {
            let t = n as f64 / cfg.sample_rate_hz;
            // cycles, reduced before scaling by 2 pi
            let cycles = (half_slope * t * t).rem_euclid(1.0);
            let (s, c) = (2.0 * PI * cycles).sin_cos();
            Complex::new(T::lit(c), T::lit(s))
        })
        .collect()
}

/// The HD-FMCW symbol: `N` identical chirps. A non-zero inter-chirp gap is
/// rendered as silence between chirps.
pub fn synth_interrogation<T: Real>(cfg: &RadarConfig) -> Result<IqSignal<T>> {
    cfg.validate()?;
    let chirp = chirp_samples::<T>(cfg);
    let gap = cfg.gap_samples();
    let mut samples = Vec::with_capacity(cfg.num_chirps * (chirp.len() + gap));
    for n in 0..cfg.num_chirps {
        samples.extend_from_slice(&chirp);
        if n + 1 < cfg.num_chirps {
            samples.extend(std::iter::repeat_n(Complex::new(T::zero(), T::zero()), gap));
        }
    }
    Ok(IqSignal {
        samples,
        sample_rate_hz: cfg.sample_rate_hz,
        t0_s: 0.0,
    })
}

/// Cuts a continuous capture into per-chirp frames, skipping the gaps.
///
/// Accepts captures of `N (L + G)` samples or `N (L + G) - G` (no trailing
/// gap).
pub fn split_with_gaps<T: Real>(sig: &IqSignal<T>, cfg: &RadarConfig) -> Result<Vec<IqSignal<T>>> {
    cfg.validate()?;
    let l = cfg.samples_per_chirp();
    let g = cfg.gap_samples();
    let n = cfg.num_chirps;
    let full = n * (l + g);
    if sig.len() != full && sig.len() != full - g {
        return Err(Error::Structure(format!(
            "capture has {} samples, expected {} chirps of {} + {} gap samples",
            sig.len(),
            n,
            l,
            g
        )));
    }
    let dt = 1.0 / sig.sample_rate_hz;
    Ok((0..n)
        .map(|k| {
            let start = k * (l + g);
            IqSignal {
                samples: sig.samples[start..start + l].to_vec(),
                sample_rate_hz: sig.sample_rate_hz,
                t0_s: sig.t0_s + start as f64 * dt,
            }
        })
        .collect())
}

/// Concatenates per-chirp frames back to back, discarding the gaps.
///
/// Static clutter is identical in every frame, so the result keeps the exact
/// `T` periodicity. The tag modulation keeps advancing during the gaps, which
/// shows up on the reconstructed timeline as an apparent modulation frequency
/// `f_m (T + g) / T`; that scaling is undone at detection time.
pub fn reconstruct_gapless<T: Real>(chirp_frames: &[IqSignal<T>], cfg: &RadarConfig) -> Result<IqSignal<T>> {
    cfg.validate()?;
    let l = cfg.samples_per_chirp();
    let first = chirp_frames
        .first()
        .ok_or_else(|| Error::Structure("no chirp frames to reconstruct".into()))?;
    let mut samples = Vec::with_capacity(chirp_frames.len() * l);
    for (i, frame) in chirp_frames.iter().enumerate() {
        if frame.len() != l {
            return Err(Error::Structure(format!(
                "frame {i} has {} samples, expected {l}",
                frame.len()
            )));
        }
        if frame.sample_rate_hz != first.sample_rate_hz {
            return Err(Error::Structure(format!(
                "frame {i} sample rate {} differs from {}",
                frame.sample_rate_hz, first.sample_rate_hz
            )));
        }
        samples.extend_from_slice(&frame.samples);
    }
    Ok(IqSignal {
        samples,
        sample_rate_hz: first.sample_rate_hz,
        t0_s: first.t0_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::FftEngine;

    fn cfg_250() -> RadarConfig {
        RadarConfig {
            carrier_hz: 24.125e9,
            bandwidth_hz: 250e6,
            chirp_duration_s: 128e-6,
            sample_rate_hz: 250e6,
            num_chirps: 1,
            interchirp_gap_s: 0.0,
            tx_power_dbm: 0.0,
        }
    }

    fn small_cfg(n: usize) -> RadarConfig {
        RadarConfig {
            carrier_hz: 24.0e9,
            bandwidth_hz: 250e6,
            chirp_duration_s: 64e-6,
            sample_rate_hz: 1e6,
            num_chirps: n,
            interchirp_gap_s: 0.0,
            tx_power_dbm: 0.0,
        }
    }

    #[test]
    fn chirp_length_and_final_frequency() {
        let cfg = cfg_250();
        let chirp = synth_chirp::<f64>(&cfg).unwrap();
        assert_eq!(chirp.len(), 32000);
        // Instantaneous frequency from the phase difference of the last two
        // samples, f = S * t at the midpoint of the pair.
        let s = chirp.samples();
        let d = (s[s.len() - 1] * s[s.len() - 2].conj()).arg();
        let f_meas = d / (2.0 * PI) * cfg.sample_rate_hz;
        let expected = cfg.bandwidth_hz * (1.0 - 1.0 / s.len() as f64);
        // phase differences wrap at f_s; B == f_s here so compare modulo f_s
        let diff = (f_meas - expected).rem_euclid(cfg.sample_rate_hz);
        let diff = diff.min(cfg.sample_rate_hz - diff);
        assert!(diff < 0.6 * cfg.slope_hz_per_s() / cfg.sample_rate_hz + 1.0, "{diff}");
    }

    #[test]
    fn non_integer_chirp_is_rejected() {
        let mut cfg = cfg_250();
        cfg.chirp_duration_s = 128.3e-9;
        let err = synth_chirp::<f64>(&cfg).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("integer sample count")));
    }

    #[test]
    fn invalid_fields_name_the_invariant() {
        let mut cfg = small_cfg(4);
        cfg.num_chirps = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("num_chirps")));
        let mut cfg = small_cfg(4);
        cfg.bandwidth_hz = -1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("bandwidth")));
    }

    #[test]
    fn autocorrelation_peak_equals_length() {
        let chirp = synth_chirp::<f64>(&small_cfg(1)).unwrap();
        let zero_lag: Complex<f64> = chirp.samples().iter().map(|z| z * z.conj()).sum();
        assert!((zero_lag.re - chirp.len() as f64).abs() < 1e-9);
        assert!(zero_lag.im.abs() < 1e-9);
        // every other lag is strictly smaller
        let s = chirp.samples();
        for lag in 1..s.len() {
            let c: Complex<f64> = (lag..s.len()).map(|i| s[i] * s[i - lag].conj()).sum();
            assert!(c.norm() < zero_lag.re);
        }
    }

    #[test]
    fn interrogation_is_periodic() {
        let cfg = small_cfg(4);
        let sym = synth_interrogation::<f64>(&cfg).unwrap();
        let l = cfg.samples_per_chirp();
        let s = sym.samples();
        for k in 0..s.len() - l {
            assert_eq!(s[k], s[k + l]);
        }
    }

    #[test]
    fn single_chirp_symbol_is_the_chirp() {
        let cfg = small_cfg(1);
        assert_eq!(
            synth_interrogation::<f64>(&cfg).unwrap(),
            synth_chirp::<f64>(&cfg).unwrap()
        );
    }

    #[test]
    fn interrogation_energy_is_n_chirps() {
        let cfg = small_cfg(7);
        let chirp = synth_chirp::<f64>(&cfg).unwrap();
        let sym = synth_interrogation::<f64>(&cfg).unwrap();
        assert!((sym.energy() - 7.0 * chirp.energy()).abs() < 1e-9);
    }

    #[test]
    fn periodic_if_occupies_only_multiples_of_n() {
        // IF of a point reflector: dechirp the symbol against a delayed copy
        // of itself, built from the same periodic chirp. Its DFT must live on
        // bins k * N only.
        let mut cfg = small_cfg(8);
        cfg.num_chirps = 8;
        let sym = synth_interrogation::<f64>(&cfg).unwrap();
        let l = cfg.samples_per_chirp();
        let delay = 3;
        let s = sym.samples();
        let mut buf: Vec<Complex<f64>> = (0..s.len())
            .map(|i| s[i] * s[(i + s.len() - delay) % s.len()].conj())
            .collect();
        FftEngine::new().forward_unitary(&mut buf);
        let peak = buf.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        for (k, z) in buf.iter().enumerate() {
            if k % cfg.num_chirps != 0 {
                assert!(z.norm_sqr() < peak * 1e-10, "bin {k} leaks");
            }
        }
        assert_eq!(buf.len(), cfg.num_chirps * l);
    }

    #[test]
    fn gapless_split_round_trip_is_identity() {
        let cfg = small_cfg(5);
        let sym = synth_interrogation::<f64>(&cfg).unwrap();
        let frames = split_with_gaps(&sym, &cfg).unwrap();
        assert_eq!(frames.len(), 5);
        let back = reconstruct_gapless(&frames, &cfg).unwrap();
        assert_eq!(back, sym);
    }

    #[test]
    fn gapped_interrogation_splits_into_identical_chirps() {
        let mut cfg = small_cfg(3);
        cfg.interchirp_gap_s = 10e-6;
        let sym = synth_interrogation::<f64>(&cfg).unwrap();
        assert_eq!(sym.len(), 3 * 64 + 2 * 10);
        let frames = split_with_gaps(&sym, &cfg).unwrap();
        let chirp = synth_chirp::<f64>(&cfg).unwrap();
        for f in &frames {
            assert_eq!(f.samples(), chirp.samples());
        }
        assert!((frames[1].t0_s() - 74e-6).abs() < 1e-12);
    }

    #[test]
    fn mismatched_frames_are_rejected() {
        let cfg = small_cfg(2);
        let a = IqSignal::<f64>::new(vec![Complex::new(1.0, 0.0); 64], 1e6, 0.0).unwrap();
        let b = IqSignal::<f64>::new(vec![Complex::new(1.0, 0.0); 63], 1e6, 0.0).unwrap();
        assert!(matches!(reconstruct_gapless(&[a, b], &cfg), Err(Error::Structure(_))));
    }

    #[test]
    fn derived_quantities() {
        let cfg = RadarConfig::tinyrad_24ghz();
        cfg.validate().unwrap();
        assert_eq!(cfg.samples_per_chirp(), 8192);
        assert!((cfg.range_resolution_m() - 0.599_584_916).abs() < 1e-9);
        assert!((cfg.bin_spacing_hz() * cfg.symbol_len() as f64 - cfg.sample_rate_hz).abs() < 1e-6);
    }
}
