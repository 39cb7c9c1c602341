//! Full RF mixing oracle.
//!
//! Synthesizes the transmitted chirp train at an RF-rate complex baseband,
//! delays it per reflector with windowed-sinc fractional-delay
//! interpolation, applies the tag's +/-1 square-wave modulation, mixes with
//! the transmitted train and low-pass decimates to the IF sample rate. It is
//! slow and only meant to cross-check the analytic path and to produce
//! gapped captures.

use std::f64::consts::PI;

use num_complex::Complex;
use rayon::prelude::*;

use super::check_range_frequency;
use super::fast::{spreading_gain, tag_paths, two_way_path};
use super::noise::{add_noise_power, noise_rng};
use crate::error::Result;
use crate::scalar::Real;
use crate::scene::{effective_fm, Scene, Vec3};
use crate::waveform::{IqSignal, RadarConfig};
use crate::SPEED_OF_LIGHT;

type C64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Half-width of the fractional-delay kernel in RF samples (the kernel
    /// spans twice this many taps).
    pub kernel_half_width: usize,
    /// RF simulation rate relative to the sweep bandwidth (rounded up to an
    /// integer multiple of the IF sample rate).
    pub oversample: f64,
    /// Half-length of the decimation low-pass, in IF samples.
    pub decimator_half_len: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            kernel_half_width: 32,
            oversample: 1.6,
            decimator_half_len: 24,
        }
    }
}

#[inline]
fn frac(x: f64) -> f64 {
    x - x.floor()
}

#[inline]
fn cis(cycles: f64) -> C64 {
    let (s, c) = (2.0 * PI * cycles).sin_cos();
    Complex::new(c, s)
}

#[inline]
fn blackman(x: f64) -> f64 {
    // x in [-1, 1], peak 1 at x = 0
    0.42 + 0.5 * (PI * x).cos() + 0.08 * (2.0 * PI * x).cos()
}

/// Weights for interpolating at fractional offset `mu` in [0, 1) past a
/// sample, over taps `m = -H+1 ..= H`.
fn delay_weights(mu: f64, half: usize) -> Vec<f64> {
    let h = half as f64;
    let s = (PI * mu).sin();
    (-(half as i64) + 1..=half as i64)
        .map(|m| {
            let x = mu - m as f64;
            let sinc = if x == 0.0 {
                1.0
            } else {
                // sin(pi (mu - m)) = (-1)^m sin(pi mu)
                let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                sign * s / (PI * x)
            };
            sinc * blackman(x / h)
        })
        .collect()
}

/// Splits an RF-sample delay into the integer offset of the first kernel
/// base and the fractional remainder.
fn split_delay(delay_samples: f64) -> (i64, f64) {
    let n0 = delay_samples.floor();
    let f = delay_samples - n0;
    if f == 0.0 {
        (n0 as i64, 0.0)
    } else {
        (n0 as i64 + 1, 1.0 - f)
    }
}

struct RfGrid {
    rate_hz: f64,
    decim: usize,
    period: usize,
    active: usize,
    slope: f64,
    bandwidth: f64,
    /// One period of the centred chirp `exp(j pi S t^2 - j pi B t)`.
    centred: Vec<C64>,
}

impl RfGrid {
    fn new(cfg: &RadarConfig, opts: &OracleOptions) -> Self {
        let fs = cfg.sample_rate_hz;
        let decim = ((opts.oversample * cfg.bandwidth_hz / fs).ceil() as usize).max(2);
        let rate_hz = decim as f64 * fs;
        let l = cfg.samples_per_chirp();
        let g = cfg.gap_samples();
        let period = (l + g) * decim;
        let active = l * decim;
        let slope = cfg.slope_hz_per_s();
        let bandwidth = cfg.bandwidth_hz;
        let centred = (0..period)
            .map(|j| {
                if j < active {
                    let t = j as f64 / rate_hz;
                    cis(frac(0.5 * slope * t * t - 0.5 * bandwidth * t))
                } else {
                    Complex::new(0.0, 0.0)
                }
            })
            .collect();
        Self {
            rate_hz,
            decim,
            period,
            active,
            slope,
            bandwidth,
            centred,
        }
    }

    fn tx(&self, i: i64) -> C64 {
        let j = i.rem_euclid(self.period as i64) as usize;
        if j < self.active {
            let t = j as f64 / self.rate_hz;
            cis(frac(0.5 * self.slope * t * t))
        } else {
            Complex::new(0.0, 0.0)
        }
    }

    /// Received copy of the transmit train delayed by `delay_s`, at RF index
    /// `i`, excluding amplitude and carrier phase.
    fn delayed(&self, i: i64, delay_s: f64, weights: &[f64], base_off: i64, half: usize) -> C64 {
        let p = self.period as i64;
        let base = i - base_off;
        let mut acc = Complex::new(0.0, 0.0);
        for (w, m) in weights.iter().zip(-(half as i64) + 1..) {
            acc += self.centred[(base + m).rem_euclid(p) as usize] * *w;
        }
        let t_src = (i as f64 / self.rate_hz - delay_s).rem_euclid(p as f64 / self.rate_hz);
        acc * cis(frac(0.5 * self.bandwidth * t_src))
    }

    /// One period of a static reflector's delayed train.
    fn static_period(&self, delay_s: f64, half: usize) -> Vec<C64> {
        let (base_off, mu) = split_delay(delay_s * self.rate_hz);
        let weights = delay_weights(mu, half);
        (0..self.period as i64)
            .into_par_iter()
            .map(|i| self.delayed(i, delay_s, &weights, base_off, half))
            .collect()
    }
}

fn decimation_filter(decim: usize, half_taps: usize) -> Vec<f64> {
    let k = half_taps as f64;
    let d = decim as f64;
    let mut h: Vec<f64> = (-(half_taps as i64)..=half_taps as i64)
        .map(|i| {
            let x = i as f64 / d;
            let sinc = if i == 0 { 1.0 } else { (PI * x).sin() / (PI * x) };
            sinc * blackman(i as f64 / (k + 1.0))
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in h.iter_mut() {
        *v /= sum;
    }
    h
}

struct StaticTag {
    rx_period: Vec<C64>,
    fm_hz: f64,
    phase_rad: f64,
    half_delay_s: f64,
}

struct MovingTag {
    position_m: Vec3,
    velocity_mps: Vec3,
    excess_path_m: f64,
    amplitude: f64,
    fm_hz: f64,
    phase_rad: f64,
}

#[inline]
fn square_wave(fm_hz: f64, phase_rad: f64, t: f64) -> f64 {
    if (2.0 * PI * frac(fm_hz * t) + phase_rad).cos() >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn simulate_rf_oracle<T: Real>(scene: &Scene, radar_id: &str, cfg: &RadarConfig) -> Result<IqSignal<T>> {
    simulate_rf_oracle_with(scene, radar_id, cfg, &OracleOptions::default())
}

/// Full capture of `N (L + G)` IF samples including the (silent) gaps.
pub fn simulate_rf_oracle_with<T: Real>(
    scene: &Scene,
    radar_id: &str,
    cfg: &RadarConfig,
    opts: &OracleOptions,
) -> Result<IqSignal<T>> {
    cfg.validate()?;
    scene.validate()?;
    let radar = scene.radar(radar_id)?;
    let grid = RfGrid::new(cfg, opts);
    let half = opts.kernel_half_width.max(1);
    let fc = cfg.carrier_hz;
    let tx_pos = radar.position_m;
    let rx_pos = radar.position_m;

    let mut clutter = vec![Complex::new(0.0, 0.0); grid.period];
    for (k, c) in scene.clutter.iter().enumerate() {
        let delay = two_way_path(c.position_m, tx_pos, rx_pos) / SPEED_OF_LIGHT;
        check_range_frequency(&format!("clutter {k}"), grid.slope * delay, cfg)?;
        let gain = c.reflect_amplitude * spreading_gain(c.position_m, tx_pos, rx_pos, cfg) * cis(-frac(fc * delay));
        for (acc, v) in clutter.iter_mut().zip(grid.static_period(delay, half)) {
            *acc += v * gain;
        }
    }

    let mut static_tags = Vec::new();
    let mut moving_tags = Vec::new();
    for tp in tag_paths(scene) {
        let tag = tp.tag;
        let amplitude = tag.reflect_amplitude * tp.gain * spreading_gain(tag.position_m, tx_pos, rx_pos, cfg);
        if tag.is_static() {
            let delay = (two_way_path(tag.position_m, tx_pos, rx_pos) + tp.excess_path_m) / SPEED_OF_LIGHT;
            check_range_frequency(&tp.label, grid.slope * delay, cfg)?;
            let gain = amplitude * cis(-frac(fc * delay));
            static_tags.push(StaticTag {
                rx_period: grid.static_period(delay, half).into_iter().map(|v| v * gain).collect(),
                fm_hz: effective_fm(tag),
                phase_rad: tag.phase_rad,
                half_delay_s: delay / 2.0,
            });
        } else {
            let end = tag.position_at(cfg.num_chirps as f64 * (cfg.chirp_duration_s + cfg.interchirp_gap_s));
            for p in [tag.position_m, end] {
                let delay = (two_way_path(p, tx_pos, rx_pos) + tp.excess_path_m) / SPEED_OF_LIGHT;
                check_range_frequency(&tp.label, grid.slope * delay, cfg)?;
            }
            moving_tags.push(MovingTag {
                position_m: tag.position_m,
                velocity_mps: tag.velocity_mps,
                excess_path_m: tp.excess_path_m,
                amplitude,
                fm_hz: effective_fm(tag),
                phase_rad: tag.phase_rad,
            });
        }
    }

    let out_len = cfg.num_chirps * (cfg.samples_per_chirp() + cfg.gap_samples());
    let k_dec = opts.decimator_half_len.max(1) * grid.decim;
    let h = decimation_filter(grid.decim, k_dec);
    let rf_len = out_len * grid.decim + 2 * k_dec;
    let offset = k_dec as i64;
    let p = grid.period as i64;

    let if_rf: Vec<C64> = (0..rf_len as i64)
        .into_par_iter()
        .map(|idx| {
            let i = idx - offset;
            let t = i as f64 / grid.rate_hz;
            let j = i.rem_euclid(p) as usize;
            let mut rx = clutter[j];
            for tag in &static_tags {
                rx += tag.rx_period[j] * square_wave(tag.fm_hz, tag.phase_rad, t - tag.half_delay_s);
            }
            for tag in &moving_tags {
                let pos = [
                    tag.position_m[0] + tag.velocity_mps[0] * t,
                    tag.position_m[1] + tag.velocity_mps[1] * t,
                    tag.position_m[2] + tag.velocity_mps[2] * t,
                ];
                let delay = (two_way_path(pos, tx_pos, rx_pos) + tag.excess_path_m) / SPEED_OF_LIGHT;
                let (base_off, mu) = split_delay(delay * grid.rate_hz);
                let weights = delay_weights(mu, half);
                let v = grid.delayed(i, delay, &weights, base_off, half);
                rx +=
                    v * tag.amplitude * cis(-frac(fc * delay)) * square_wave(tag.fm_hz, tag.phase_rad, t - delay / 2.0);
            }
            grid.tx(i) * rx.conj()
        })
        .collect();

    let mut samples: Vec<C64> = (0..out_len)
        .into_par_iter()
        .map(|n| {
            let centre = n * grid.decim + k_dec;
            let window = &if_rf[centre - k_dec..=centre + k_dec];
            window.iter().zip(&h).map(|(v, w)| v * *w).sum()
        })
        .collect();

    if let Some(power) = scene.noise_power(radar, cfg) {
        add_noise_power(&mut samples, power, &mut noise_rng(scene.rng_seed, &radar.id, 0));
    }
    IqSignal::new(samples, cfg.sample_rate_hz, 0.0).map(|s| s.cast())
}
