//! Scenario execution: simulate, localize, track and solve every trial,
//! then score against ground truth.

use std::fs;
use std::path::Path;
use std::time::Instant;

use hawkeye_core::channel::{simulate_if_fast, simulate_if_fast_array, simulate_rf_oracle};
use hawkeye_core::geometry::{aoa_localize, estimate_aoa, trilaterate_in, Observation, SolverOptions};
use hawkeye_core::localizer::{
    baseline_fmcw_range_demod, detect_fm_with, Localizer, RangeEstimate, Spectrum, TagDetection,
};
use hawkeye_core::scene::{range_at, range_rate_at, RadarNode, ReflectorRef, Scene};
use hawkeye_core::tracker::{
    classify_mobile, dispersion_hz_with, isolation_half_width, track_in_spectrum, TrackOptions,
};
use hawkeye_core::waveform::IqSignal;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::metrics::{MetricsInput, MetricsReport, StageTiming, TrialFailure};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub trial: usize,
    /// Empty for detections that matched no identity.
    pub tag_id: String,
    /// `None` for detections that match no tag in the scene.
    pub true_range_m: Option<f64>,
    pub est_range_m: Option<f64>,
    pub error_m: Option<f64>,
    pub snr_db: Option<f64>,
    pub detected: bool,
    pub radar_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionRow {
    pub trial: usize,
    pub tag_id: String,
    pub position_m: Vec<f64>,
    pub residual_m: f64,
    pub error_m: Option<f64>,
    /// `multilateration` or `aoa:<radar id>`.
    pub method: String,
    pub radars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub trial: usize,
    pub radar_id: String,
    pub tag_id: String,
    pub true_range_m: f64,
    pub baseline_range_m: f64,
    pub error_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackRow {
    pub trial: usize,
    pub radar_id: String,
    pub tag_id: String,
    pub t_s: f64,
    pub range_m: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MobilityRow {
    pub trial: usize,
    pub radar_id: String,
    pub tag_id: String,
    pub dispersion_hz: f64,
    pub mobile: bool,
    pub fitted_velocity_mps: Option<f64>,
    pub true_range_rate_mps: f64,
}

#[derive(Debug, Default)]
struct TrialOutput {
    rows: Vec<ResultRow>,
    positions: Vec<PositionRow>,
    baseline: Vec<BaselineRow>,
    tracks: Vec<TrackRow>,
    mobility: Vec<MobilityRow>,
    spectra: Vec<(String, Spectrum<f64>)>,
    notes: Vec<String>,
    timing: StageTiming,
}

pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub positions: Vec<PositionRow>,
    pub baseline: Vec<BaselineRow>,
    pub tracks: Vec<TrackRow>,
    pub mobility: Vec<MobilityRow>,
    /// Symbol spectra of trial 0 per radar, when requested.
    pub spectra: Vec<(String, Spectrum<f64>)>,
    pub metrics: MetricsReport,
}

/// The scene of one trial: its own noise seed and jittered tag positions,
/// both drawn from a stream keyed by the trial index.
pub fn trial_scene(sc: &Scenario, trial: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(trial as u64);
    let mut scene = sc.scene.clone();
    scene.rng_seed = rng.next_u64();
    let jitter = sc.plan.position_jitter_m;
    for tag in &mut scene.tags {
        for (p, j) in tag.position_m.iter_mut().zip(jitter) {
            if j > 0.0 {
                *p += rng.random_range(-j..=j);
            }
        }
    }
    scene
}

/// Mid-symbol time, where a symbol-wide estimate of a moving tag applies.
pub fn reference_time(sc: &Scenario) -> f64 {
    let c = &sc.radar_config;
    c.num_chirps as f64 * (c.chirp_duration_s + c.interchirp_gap_s) / 2.0
}

/// IF captures of one radar for one trial: a single signal, or one per
/// receive element when angle of arrival is in use.
pub fn simulate_radar(sc: &Scenario, scene: &Scene, radar: &RadarNode) -> Result<Vec<IqSignal<f64>>> {
    let cfg = &sc.radar_config;
    Ok(if sc.pipeline.oracle {
        vec![simulate_rf_oracle(scene, &radar.id, cfg)?]
    } else if sc.pipeline.aoa {
        simulate_if_fast_array(scene, &radar.id, cfg)?
    } else {
        vec![simulate_if_fast(scene, &radar.id, cfg)?]
    })
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn aoa_position(radar: &RadarNode, range_m: f64, angle_rad: f64) -> Vec<f64> {
    let a = radar.array_axis;
    let n = (a[0] * a[0] + a[1] * a[1]).sqrt();
    let axis = [a[0] / n, a[1] / n];
    let broadside = [axis[1], -axis[0]];
    let [u, v] = aoa_localize(range_m, angle_rad);
    vec![
        radar.position_m[0] + u * broadside[0] + v * axis[0],
        radar.position_m[1] + u * broadside[1] + v * axis[1],
    ]
}

fn run_trial(sc: &Scenario, trial: usize) -> Result<TrialOutput> {
    let cfg = &sc.radar_config;
    let p = &sc.pipeline;
    let scene = trial_scene(sc, trial);
    let t_ref = reference_time(sc);
    let ids = sc.id_table();
    let localizer = Localizer::<f64>::new(p.localize_options());
    let mut out = TrialOutput::default();
    // per scene tag: (radar index, range estimate) pairs for the solver
    let mut seen: Vec<Vec<(usize, f64)>> = vec![Vec::new(); scene.tags.len()];

    for (ri, radar) in scene.radars.iter().enumerate() {
        let t0 = Instant::now();
        let sigs = simulate_radar(sc, &scene, radar)?;
        out.timing.simulate_s += secs(t0);

        let t0 = Instant::now();
        let spec = localizer.spectrum(&sigs[0], cfg)?;
        let estimates = localizer.localize_spectrum(&spec, cfg, &ids)?;
        out.timing.localize_s += secs(t0);

        let mut used = vec![false; estimates.len()];
        let mut chosen: Vec<(usize, &RangeEstimate)> = Vec::new();
        for (ti, tag) in scene.tags.iter().enumerate() {
            let truth = range_at(&scene, &radar.id, ReflectorRef::Tag(&tag.id), t_ref)?;
            let best = estimates
                .iter()
                .enumerate()
                .filter(|(_, e)| e.tag_id.as_deref() == Some(tag.id.as_str()))
                .max_by(|a, b| a.1.snr_db.total_cmp(&b.1.snr_db));
            let mut row = ResultRow {
                trial,
                tag_id: tag.id.clone(),
                true_range_m: Some(truth),
                est_range_m: None,
                error_m: None,
                snr_db: None,
                detected: false,
                radar_id: radar.id.clone(),
            };
            if let Some((k, e)) = best {
                used[k] = true;
                row.est_range_m = Some(e.range_m);
                row.error_m = Some((e.range_m - truth).abs());
                row.snr_db = Some(e.snr_db);
                row.detected = true;
                seen[ti].push((ri, e.range_m));
                chosen.push((ti, e));
            }
            out.rows.push(row);

            if p.baseline {
                let b = baseline_fmcw_range_demod(&sigs[0], cfg, tag.fm_nominal_hz)?;
                out.baseline.push(BaselineRow {
                    trial,
                    radar_id: radar.id.clone(),
                    tag_id: tag.id.clone(),
                    true_range_m: truth,
                    baseline_range_m: b,
                    error_m: (b - truth).abs(),
                });
            }
        }
        for (e, _) in estimates.iter().zip(&used).filter(|(_, u)| !**u) {
            out.rows.push(ResultRow {
                trial,
                tag_id: e.tag_id.clone().unwrap_or_default(),
                true_range_m: None,
                est_range_m: Some(e.range_m),
                error_m: None,
                snr_db: Some(e.snr_db),
                detected: true,
                radar_id: radar.id.clone(),
            });
        }

        if p.track_stride.is_some() || p.aoa {
            let dets = detect_fm_with(&spec, &localizer.options.detect);
            let det_for = |e: &RangeEstimate| -> Option<TagDetection> {
                dets.iter().find(|d| d.offset_bins == e.offset_bins).cloned()
            };
            for &(ti, e) in &chosen {
                let tag = &scene.tags[ti];
                let Some(det) = det_for(e) else { continue };
                if let Some(stride) = p.track_stride {
                    let t0 = Instant::now();
                    let half = isolation_half_width(&dets, det.offset_bins, cfg.num_chirps);
                    let opts = TrackOptions {
                        extract: localizer.options.extract.clone(),
                        band_half_width: half,
                        fm_hz: Some(e.fm_detected_hz * cfg.gap_stretch()),
                    };
                    let track = track_in_spectrum(&spec, cfg, &det, stride, &opts)?;
                    let disp = dispersion_hz_with(&spec, &det, half);
                    out.tracks.extend(track.samples.iter().map(|s| TrackRow {
                        trial,
                        radar_id: radar.id.clone(),
                        tag_id: tag.id.clone(),
                        t_s: s.t_s,
                        range_m: s.range_m,
                        snr_db: s.snr_db,
                    }));
                    out.mobility.push(MobilityRow {
                        trial,
                        radar_id: radar.id.clone(),
                        tag_id: tag.id.clone(),
                        dispersion_hz: disp,
                        mobile: classify_mobile(disp),
                        fitted_velocity_mps: track.fitted_velocity_mps(),
                        true_range_rate_mps: range_rate_at(&scene, &radar.id, &tag.id, t_ref)?,
                    });
                    out.timing.track_s += secs(t0);
                }
                if p.aoa {
                    let t0 = Instant::now();
                    match estimate_aoa(&sigs, cfg, &det, radar) {
                        Ok(a) => {
                            let pos = aoa_position(radar, e.range_m, a.angle_rad);
                            out.positions.push(PositionRow {
                                trial,
                                tag_id: tag.id.clone(),
                                error_m: Some(distance(&pos, &tag.position_at(t_ref)[..2])),
                                position_m: pos,
                                residual_m: 0.0,
                                method: format!("aoa:{}", radar.id),
                                radars: 1,
                            });
                        }
                        Err(err) => out.notes.push(format!("tag `{}` at `{}`: {err}", tag.id, radar.id)),
                    }
                    out.timing.geometry_s += secs(t0);
                }
            }
        }
        if p.dump_spectra && trial == 0 {
            out.spectra.push((radar.id.clone(), spec));
        }
    }

    if p.dims >= 2 && !p.aoa {
        let t0 = Instant::now();
        let opts = SolverOptions {
            hint: p.hint.clone(),
            ..SolverOptions::default()
        };
        for (tag, hits) in scene.tags.iter().zip(&seen) {
            if hits.len() < p.dims {
                continue;
            }
            let obs: Vec<Observation> = hits
                .iter()
                .map(|&(ri, r)| {
                    let radar = &scene.radars[ri];
                    Observation::new(radar.id.clone(), radar.position_m, r)
                })
                .collect();
            match trilaterate_in::<f64>(&obs, p.dims, None, &opts) {
                Ok(est) => out.positions.push(PositionRow {
                    trial,
                    tag_id: tag.id.clone(),
                    error_m: Some(est.error_to(&tag.position_at(t_ref))),
                    residual_m: est.residual_m,
                    position_m: est.position_m,
                    method: "multilateration".into(),
                    radars: obs.len(),
                }),
                Err(err) => out.notes.push(format!("tag `{}`: {err}", tag.id)),
            }
        }
        out.timing.geometry_s += secs(t0);
    }
    Ok(out)
}

/// Runs every trial of `sc` (in parallel) and scores the results.
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput> {
    sc.validate()?;
    let start = Instant::now();
    let trials: Vec<Result<TrialOutput>> = (0..sc.plan.trials).into_par_iter().map(|t| run_trial(sc, t)).collect();

    let mut rows = Vec::new();
    let mut positions = Vec::new();
    let mut baseline = Vec::new();
    let mut tracks = Vec::new();
    let mut mobility = Vec::new();
    let mut spectra = Vec::new();
    let mut failures = Vec::new();
    let mut timing = StageTiming::default();
    for (trial, res) in trials.into_iter().enumerate() {
        match res {
            Ok(t) => {
                rows.extend(t.rows);
                positions.extend(t.positions);
                baseline.extend(t.baseline);
                tracks.extend(t.tracks);
                mobility.extend(t.mobility);
                spectra.extend(t.spectra);
                failures.extend(t.notes.into_iter().map(|error| TrialFailure { trial, error }));
                timing.add(&t.timing);
            }
            Err(e) => failures.push(TrialFailure {
                trial,
                error: e.to_string(),
            }),
        }
    }
    timing.total_s = secs(start);

    let metrics = MetricsReport::compute(MetricsInput {
        scenario: &sc.name,
        seed: sc.seed,
        trials: sc.plan.trials,
        failed_trials: failures,
        rows: &rows,
        positions: &positions,
        baseline: &baseline,
        mobility: &mobility,
        timing,
    });
    Ok(RunOutput {
        rows,
        positions,
        baseline,
        tracks,
        mobility,
        spectra,
        metrics,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const RESULTS_HEADER: [&str; 8] = [
    "trial",
    "tag_id",
    "true_range_m",
    "est_range_m",
    "error_m",
    "snr_db",
    "detected",
    "radar_id",
];

/// Writes the run's result files into `dir`.
pub fn write_run(dir: &Path, sc: &Scenario, run: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("scenario.toml"), sc.to_toml_string()?)?;

    let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
    w.write_record(RESULTS_HEADER)?;
    for r in &run.rows {
        w.write_record([
            r.trial.to_string(),
            r.tag_id.clone(),
            opt(r.true_range_m),
            opt(r.est_range_m),
            opt(r.error_m),
            opt(r.snr_db),
            r.detected.to_string(),
            r.radar_id.clone(),
        ])?;
    }
    w.flush()?;

    if sc.pipeline.dims >= 2 || !run.positions.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("positions.csv"))?;
        w.write_record([
            "trial",
            "tag_id",
            "x",
            "y",
            "z",
            "residual_m",
            "error_m",
            "method",
            "radars",
        ])?;
        for p in &run.positions {
            let c = |i: usize| opt(p.position_m.get(i).copied());
            w.write_record([
                p.trial.to_string(),
                p.tag_id.clone(),
                c(0),
                c(1),
                c(2),
                p.residual_m.to_string(),
                opt(p.error_m),
                p.method.clone(),
                p.radars.to_string(),
            ])?;
        }
        w.flush()?;
    }

    if sc.pipeline.baseline {
        let mut w = csv::Writer::from_path(dir.join("baseline.csv"))?;
        w.write_record([
            "trial",
            "radar_id",
            "tag_id",
            "true_range_m",
            "baseline_range_m",
            "error_m",
        ])?;
        for b in &run.baseline {
            w.write_record([
                b.trial.to_string(),
                b.radar_id.clone(),
                b.tag_id.clone(),
                b.true_range_m.to_string(),
                b.baseline_range_m.to_string(),
                b.error_m.to_string(),
            ])?;
        }
        w.flush()?;
    }

    if sc.pipeline.track_stride.is_some() {
        let mut w = csv::Writer::from_path(dir.join("tracks.csv"))?;
        w.write_record(["trial", "radar_id", "tag_id", "t_s", "range_m", "snr_db"])?;
        for t in &run.tracks {
            w.write_record([
                t.trial.to_string(),
                t.radar_id.clone(),
                t.tag_id.clone(),
                t.t_s.to_string(),
                t.range_m.to_string(),
                t.snr_db.to_string(),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("mobility.csv"))?;
        w.write_record([
            "trial",
            "radar_id",
            "tag_id",
            "dispersion_hz",
            "mobile",
            "fitted_velocity_mps",
            "true_range_rate_mps",
        ])?;
        for m in &run.mobility {
            w.write_record([
                m.trial.to_string(),
                m.radar_id.clone(),
                m.tag_id.clone(),
                m.dispersion_hz.to_string(),
                m.mobile.to_string(),
                opt(m.fitted_velocity_mps),
                m.true_range_rate_mps.to_string(),
            ])?;
        }
        w.flush()?;
    }

    for (radar, spec) in &run.spectra {
        spec.write_csv(fs::File::create(dir.join(format!("spectrum_{radar}.csv")))?)?;
    }

    fs::write(
        dir.join("metrics.json"),
        serde_json::to_string_pretty(&run.metrics)? + "\n",
    )?;
    fs::write(
        dir.join("timing.json"),
        serde_json::to_string_pretty(&run.metrics.timing)? + "\n",
    )?;
    Ok(())
}
