use hawkeye_core::channel::simulate_if_fast;
use hawkeye_core::error::Error;
use hawkeye_core::localizer::{detect_fm, if_spectrum, TagDetection};
use hawkeye_core::scene::{NoiseSpec, RadarNode, Scene, TagSpec};
use hawkeye_core::tracker::{classify_mobile, dispersion_hz, track, track_with, Track, TrackOptions};
use hawkeye_core::waveform::{IqSignal, RadarConfig};
use hawkeye_core::SPEED_OF_LIGHT;

fn cfg(n: usize) -> RadarConfig {
    RadarConfig {
        carrier_hz: 24.125e9,
        bandwidth_hz: 250e6,
        chirp_duration_s: 32e-6,
        sample_rate_hz: 4e6,
        num_chirps: n,
        interchirp_gap_s: 0.0,
        tx_power_dbm: 0.0,
    }
}

fn pad_step(c: &RadarConfig) -> f64 {
    SPEED_OF_LIGHT / (2.0 * c.bandwidth_hz * 128.0)
}

fn fm_for(c: &RadarConfig) -> f64 {
    (c.num_chirps / 2) as f64 * c.bin_spacing_hz() + 3.0 / c.chirp_duration_s
}

fn scene(start: [f64; 3], velocity: [f64; 3], fm: f64) -> Scene {
    let mut tag = TagSpec::new("t", start, fm);
    tag.velocity_mps = velocity;
    Scene {
        radars: vec![RadarNode::at("r", [0.0; 3])],
        tags: vec![tag],
        clutter: vec![],
        multipath: vec![],
        noise: NoiseSpec::Off,
        rng_seed: 0,
    }
}

fn run(c: &RadarConfig, s: &Scene, fm_hint: f64, stride: usize) -> (f64, Track) {
    let sig: IqSignal<f64> = simulate_if_fast(s, "r", c).unwrap();
    let spec = if_spectrum(&sig, c).unwrap();
    let d = detect_fm(&spec, 10.0);
    assert_eq!(d.len(), 1, "{d:?}");
    let opts = TrackOptions {
        fm_hz: Some(fm_hint),
        ..TrackOptions::default()
    };
    (
        dispersion_hz(&spec, &d[0]),
        track_with(&sig, c, &d[0], stride, &opts).unwrap(),
    )
}

#[test]
fn static_tag_track_is_flat_and_static() {
    let c = cfg(4096);
    let fm = fm_for(&c);
    let (disp, tr) = run(&c, &scene([7.3, 1.0, 0.0], [0.0; 3], fm), fm, 520);
    assert!(disp < 1e-3, "{disp}");
    assert!(!classify_mobile(disp));
    let truth = (7.3f64 * 7.3 + 1.0).sqrt();
    for s in &tr.samples {
        assert!((s.range_m - truth).abs() < pad_step(&c), "{}", s.range_m - truth);
    }
}

#[test]
fn timestamps_step_by_the_update_interval() {
    let c = cfg(4096);
    let fm = fm_for(&c);
    let (_, tr) = run(&c, &scene([5.0, 0.0, 0.0], [0.0; 3], fm), fm, 520);
    assert_eq!(tr.samples.len(), 8);
    for w in tr.samples.windows(2) {
        assert!((w[1].t_s - w[0].t_s - 520.0 * 32e-6).abs() < 1e-12);
    }
    assert!((tr.update_rate_hz(&c) - 60.1).abs() < 0.1);
}

#[test]
fn robot_speed_tag_is_tracked() {
    let c = cfg(16384);
    let fm = fm_for(&c);
    let (disp, tr) = run(&c, &scene([5.0, 0.0, 0.0], [0.17, 0.0, 0.0], fm), fm, 520);
    assert!(disp > 0.0);
    let v = tr.fitted_velocity_mps().unwrap();
    assert!((v / 0.17 - 1.0).abs() < 0.05, "{v}");
}

#[test]
fn reversed_trajectory_reverses_the_track() {
    let c = cfg(4096);
    let fm = fm_for(&c);
    let v = 0.3;
    let duration = c.num_chirps as f64 * c.chirp_duration_s;
    let (_, fwd) = run(&c, &scene([6.0, 0.0, 0.0], [v, 0.0, 0.0], fm), fm, 512);
    let (_, rev) = run(&c, &scene([6.0 + v * duration, 0.0, 0.0], [-v, 0.0, 0.0], fm), fm, 512);
    assert_eq!(fwd.samples.len(), rev.samples.len());
    for (a, b) in fwd.samples.iter().zip(rev.samples.iter().rev()) {
        assert!(
            (a.range_m - b.range_m).abs() < pad_step(&c),
            "{} {}",
            a.range_m,
            b.range_m
        );
    }
}

#[test]
fn doppler_like_offset_is_removed_with_the_modulation() {
    let c = cfg(4096);
    let fm = fm_for(&c);
    let (_, base) = run(&c, &scene([9.0, 0.0, 0.0], [0.0; 3], fm), fm, 1024);
    for fd in [-7000.0, 250.0, 15000.0] {
        let (_, shifted) = run(&c, &scene([9.0, 0.0, 0.0], [0.0; 3], fm + fd), fm, 1024);
        for (a, b) in base.samples.iter().zip(&shifted.samples) {
            assert!(
                (a.range_m - b.range_m).abs() < pad_step(&c),
                "f_d {fd}: {} {}",
                a.range_m,
                b.range_m
            );
        }
    }
}

/// Millisecond chirps with an 8 s symbol, so the envelope sweeps several
/// grid lines at walking speed.
fn long_symbol() -> RadarConfig {
    RadarConfig {
        chirp_duration_s: 1e-3,
        sample_rate_hz: 256e3,
        num_chirps: 8192,
        ..cfg(1)
    }
}

#[test]
fn dispersion_grows_with_speed() {
    let c = long_symbol();
    let fm = fm_for(&c);
    let mut last = 0.0;
    let mut verdicts = Vec::new();
    for i in 0..=10 {
        let v = 0.05 * i as f64;
        let (disp, _) = run(&c, &scene([5.0, 0.0, 0.0], [v, 0.0, 0.0], fm), fm, c.num_chirps);
        assert!(disp >= last, "dispersion fell from {last} to {disp} at {v} m/s");
        last = disp;
        verdicts.push(classify_mobile(disp));
    }
    assert!(last > 0.5);
    // once mobile, faster tags stay mobile
    if let Some(first) = verdicts.iter().position(|&m| m) {
        assert!(verdicts[first..].iter().all(|&m| m));
    }
}

#[test]
fn fast_tag_is_mobile() {
    let c = long_symbol();
    let fm = fm_for(&c);
    let (disp, _) = run(&c, &scene([5.0, 0.0, 0.0], [2.0, 0.0, 0.0], fm), fm, c.num_chirps);
    assert!(classify_mobile(disp), "{disp}");
}

#[test]
fn interval_is_validated() {
    let c = cfg(64);
    let s = scene([5.0, 0.0, 0.0], [0.0; 3], 20.0 * c.bin_spacing_hz());
    let sig: IqSignal<f64> = simulate_if_fast(&s, "r", &c).unwrap();
    let spec = if_spectrum(&sig, &c).unwrap();
    let d = TagDetection::at_residue(&spec, 20);
    assert!(matches!(track(&sig, &c, &d, 0), Err(Error::Config(_))));
    assert!(matches!(track(&sig, &c, &d, 65), Err(Error::Config(_))));
    assert_eq!(track(&sig, &c, &d, 64).unwrap().samples.len(), 1);
}
