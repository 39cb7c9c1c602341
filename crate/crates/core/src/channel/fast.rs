//! Analytic dechirped-IF model.
//!
//! Each static reflector contributes a per-chirp tone at `f_r = S * tau`
//! with a constant phase, rebuilt identically every chirp. Tags add the FSK
//! fundamental `exp(j 2 pi f_m t)` on the global timeline together with the
//! carrier phase of the (possibly moving) round trip, which is where the
//! Doppler shift comes from.

use std::f64::consts::PI;

use num_complex::Complex;
use rayon::prelude::*;

use super::noise::{add_noise_power, noise_rng};
use super::{check_range_frequency, SQUARE_WAVE_FUNDAMENTAL};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scene::{db_to_amplitude, db_to_power, effective_fm, norm, sub, RadarNode, Scene, Vec3};
use crate::waveform::{IqSignal, RadarConfig};
use crate::SPEED_OF_LIGHT;

/// Round-trip path from the transmitter to `p` and back to the receiver.
pub(crate) fn two_way_path(p: Vec3, tx: Vec3, rx: Vec3) -> f64 {
    norm(sub(p, tx)) + norm(sub(p, rx))
}

/// `sqrt(P_tx) / (R_tx * R_rx)`.
pub(crate) fn spreading_gain(p: Vec3, tx: Vec3, rx: Vec3, cfg: &RadarConfig) -> f64 {
    db_to_power(cfg.tx_power_dbm).sqrt() / (norm(sub(p, tx)) * norm(sub(p, rx)))
}

#[inline]
fn frac(x: f64) -> f64 {
    x - x.floor()
}

#[inline]
fn cis(cycles: f64, extra_rad: f64) -> Complex<f64> {
    let (s, c) = (2.0 * PI * cycles + extra_rad).sin_cos();
    Complex::new(c, s)
}

/// One modulated tag return: the line of sight or a multipath copy.
pub(crate) struct TagPath<'a> {
    pub label: String,
    pub tag: &'a crate::scene::TagSpec,
    pub excess_path_m: f64,
    pub gain: f64,
}

pub(crate) fn tag_paths(scene: &Scene) -> Vec<TagPath<'_>> {
    let mut out = Vec::new();
    for tag in &scene.tags {
        out.push(TagPath {
            label: format!("tag `{}`", tag.id),
            tag,
            excess_path_m: 0.0,
            gain: db_to_amplitude(-tag.blockage_db),
        });
        for tap in scene.multipath.iter().filter(|t| t.tag_id == tag.id) {
            out.push(TagPath {
                label: format!("multipath copy of tag `{}`", tag.id),
                tag,
                excess_path_m: tap.excess_path_m,
                gain: db_to_amplitude(-tag.blockage_db) * db_to_amplitude(-tap.attenuation_db),
            });
        }
    }
    out
}

#[derive(Clone, Copy)]
struct ChirpTerm {
    fr_hz: f64,
    amplitude: f64,
    /// Constant phase in cycles (carrier, static tags only).
    carrier_cycles: f64,
    /// Residual video phase `-pi S tau^2`, radians.
    rvp_rad: f64,
}

struct TagTerms {
    chirps: Vec<ChirpTerm>,
    fm_hz: f64,
    phase_rad: f64,
    moving: Option<MovingPath>,
}

struct MovingPath {
    position_m: Vec3,
    velocity_mps: Vec3,
    tx: Vec3,
    rx: Vec3,
    excess_path_m: f64,
}

impl MovingPath {
    fn path_at(&self, t: f64) -> f64 {
        let p = [
            self.position_m[0] + self.velocity_mps[0] * t,
            self.position_m[1] + self.velocity_mps[1] * t,
            self.position_m[2] + self.velocity_mps[2] * t,
        ];
        two_way_path(p, self.tx, self.rx) + self.excess_path_m
    }
}

/// Noiseless IF seen by receive element `antenna` of `radar`.
pub(crate) fn fast_if_samples(
    scene: &Scene,
    radar: &RadarNode,
    antenna: usize,
    cfg: &RadarConfig,
) -> Result<Vec<Complex<f64>>> {
    let l = cfg.samples_per_chirp();
    let n_chirps = cfg.num_chirps;
    let fs = cfg.sample_rate_hz;
    let slope = cfg.slope_hz_per_s();
    let fc = cfg.carrier_hz;
    let tx = radar.position_m;
    let rx = radar.rx_position(antenna);

    // Static clutter: one chirp period, reused for every chirp.
    let mut period = vec![Complex::new(0.0, 0.0); l];
    for (k, c) in scene.clutter.iter().enumerate() {
        let path = two_way_path(c.position_m, tx, rx);
        let tau = path / SPEED_OF_LIGHT;
        let fr = slope * tau;
        check_range_frequency(&format!("clutter {k}"), fr, cfg)?;
        let amp = c.reflect_amplitude * spreading_gain(c.position_m, tx, rx, cfg);
        let phase0 = frac(fc * tau);
        let rvp = -PI * slope * tau * tau;
        for (i, v) in period.iter_mut().enumerate() {
            let t = i as f64 / fs;
            *v += amp * cis(frac(fr * t) + phase0, rvp);
        }
    }

    let chirp_s = cfg.chirp_duration_s;
    let mut tags = Vec::new();
    for tp in tag_paths(scene) {
        let tag = tp.tag;
        let mut chirps = Vec::with_capacity(n_chirps);
        for n in 0..n_chirps {
            let p = tag.position_at(n as f64 * chirp_s);
            let path = two_way_path(p, tx, rx) + tp.excess_path_m;
            let tau = path / SPEED_OF_LIGHT;
            let fr = slope * tau;
            check_range_frequency(&tp.label, fr, cfg)?;
            chirps.push(ChirpTerm {
                fr_hz: fr,
                amplitude: SQUARE_WAVE_FUNDAMENTAL * tag.reflect_amplitude * tp.gain * spreading_gain(p, tx, rx, cfg),
                carrier_cycles: frac(fc * tau),
                rvp_rad: -PI * slope * tau * tau,
            });
            if tag.is_static() {
                // every chirp is identical
                chirps = vec![chirps[0]; n_chirps];
                break;
            }
        }
        tags.push(TagTerms {
            chirps,
            fm_hz: effective_fm(tag),
            phase_rad: tag.phase_rad,
            moving: (!tag.is_static()).then_some(MovingPath {
                position_m: tag.position_m,
                velocity_mps: tag.velocity_mps,
                tx,
                rx,
                excess_path_m: tp.excess_path_m,
            }),
        });
    }

    let mut out = vec![Complex::new(0.0, 0.0); n_chirps * l];
    out.par_chunks_mut(l).enumerate().for_each(|(n, chunk)| {
        chunk.copy_from_slice(&period);
        for tag in &tags {
            let term = &tag.chirps[n];
            for (i, v) in chunk.iter_mut().enumerate() {
                let t_local = i as f64 / fs;
                let t = (n * l + i) as f64 / fs;
                let carrier = match &tag.moving {
                    Some(m) => frac(fc * m.path_at(t) / SPEED_OF_LIGHT),
                    None => term.carrier_cycles,
                };
                let cycles = frac(term.fr_hz * t_local) + carrier + frac(tag.fm_hz * t);
                *v += term.amplitude * cis(cycles, term.rvp_rad + tag.phase_rad);
            }
        }
    });
    Ok(out)
}

fn require_gapless(cfg: &RadarConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.interchirp_gap_s != 0.0 {
        return Err(Error::Config(
            "the analytic IF path needs a gapless configuration; use the RF oracle for gapped captures".into(),
        ));
    }
    Ok(())
}

/// IF signal of `radar_id`'s co-located receive element for the whole
/// symbol, with receiver noise from the scene's noise model.
pub fn simulate_if_fast<T: Real>(scene: &Scene, radar_id: &str, cfg: &RadarConfig) -> Result<IqSignal<T>> {
    require_gapless(cfg)?;
    scene.validate()?;
    let radar = scene.radar(radar_id)?;
    let mut samples = fast_if_samples(scene, radar, 0, cfg)?;
    if let Some(p) = scene.noise_power(radar, cfg) {
        add_noise_power(&mut samples, p, &mut noise_rng(scene.rng_seed, &radar.id, 0));
    }
    IqSignal::new(samples, cfg.sample_rate_hz, 0.0).map(|s| s.cast())
}

/// One IF signal per receive element of `radar_id`'s array.
pub fn simulate_if_fast_array<T: Real>(scene: &Scene, radar_id: &str, cfg: &RadarConfig) -> Result<Vec<IqSignal<T>>> {
    require_gapless(cfg)?;
    scene.validate()?;
    let radar = scene.radar(radar_id)?;
    (0..radar.rx_antennas)
        .map(|m| {
            let mut samples = fast_if_samples(scene, radar, m, cfg)?;
            if let Some(p) = scene.noise_power(radar, cfg) {
                add_noise_power(&mut samples, p, &mut noise_rng(scene.rng_seed, &radar.id, m as u64));
            }
            IqSignal::new(samples, cfg.sample_rate_hz, 0.0).map(|s| s.cast())
        })
        .collect()
}
