use hawkeye_core::channel::simulate_if_fast;
use hawkeye_core::localizer::{
    detect_fm, extract_fr_with, fr_to_range, isolate_tag, localize_all, ExtractOptions, IdTable, LocalizeOptions,
    Localizer,
};
use hawkeye_core::scene::{ClutterSpec, NoiseSpec, RadarNode, Scene, TagSpec};
use hawkeye_core::waveform::{IqSignal, RadarConfig};

fn cfg(n: usize) -> RadarConfig {
    RadarConfig {
        carrier_hz: 24.125e9,
        bandwidth_hz: 250e6,
        chirp_duration_s: 256e-6,
        sample_rate_hz: 4e6,
        num_chirps: n,
        interchirp_gap_s: 0.0,
        tx_power_dbm: 10.0,
    }
}

fn scene(range: f64, fm: f64) -> Scene {
    Scene {
        radars: vec![RadarNode::at("r0", [0.0; 3])],
        tags: vec![TagSpec::new("t0", [range, 0.0, 0.0], fm)],
        clutter: vec![
            ClutterSpec {
                position_m: [0.0, 12.0, 0.0],
                reflect_amplitude: 50.0,
            },
            ClutterSpec {
                position_m: [30.0, 40.0, 0.0],
                reflect_amplitude: 2000.0,
            },
        ],
        multipath: vec![],
        noise: NoiseSpec::Off,
        rng_seed: 1,
    }
}

#[test]
fn single_tag_range_through_clutter() {
    let c = cfg(16);
    let fm = 411.0 * c.bin_spacing_hz();
    let truth = 37.123_456;
    let s = scene(truth, fm);
    let sig: IqSignal<f64> = simulate_if_fast(&s, "r0", &c).unwrap();
    let ids = IdTable::from_scene(&s);

    let est = localize_all(&sig, &c, &ids, 10.0).unwrap();
    assert_eq!(est.len(), 1, "{est:?}");
    assert_eq!(est[0].tag_id.as_deref(), Some("t0"));
    assert!((est[0].fm_detected_hz - fm).abs() < 1e-6);
    assert!((est[0].range_m - truth).abs() < 5e-4, "{}", est[0].range_m - truth);

    let mut opts = LocalizeOptions::default();
    opts.extract.refine = false;
    let est = Localizer::new(opts).localize(&sig, &c, &ids).unwrap();
    assert!((est[0].range_m - truth).abs() < 2.35e-3);
}

#[test]
fn low_level_steps_agree_with_the_pipeline() {
    let c = cfg(16);
    // modulation below the grid spacing, so no comb offset applies
    let fm = 5.0 * c.bin_spacing_hz();
    let truth = 21.5;
    let sig: IqSignal<f64> = simulate_if_fast(&scene(truth, fm), "r0", &c).unwrap();
    let spec = hawkeye_core::localizer::if_spectrum(&sig, &c).unwrap();
    let det = detect_fm(&spec, 10.0);
    assert_eq!(det.len(), 1);
    assert_eq!(det[0].offset_bins, 5);
    let clean = isolate_tag(&spec, &det[0]).unwrap();
    let fr = extract_fr_with(&clean, &c, &ExtractOptions::default()).unwrap();
    assert!((fr_to_range(fr, &c).unwrap() - truth).abs() < 5e-4);
}

#[test]
fn f32_pipeline_matches_f64() {
    let c = cfg(16);
    let fm = 411.0 * c.bin_spacing_hz();
    let s = scene(63.3, fm);
    let ids = IdTable::from_scene(&s);
    let a = localize_all(&simulate_if_fast::<f64>(&s, "r0", &c).unwrap(), &c, &ids, 10.0).unwrap();
    let b = localize_all(&simulate_if_fast::<f32>(&s, "r0", &c).unwrap(), &c, &ids, 10.0).unwrap();
    assert_eq!(a.len(), 1);
    assert_eq!(b.len(), 1);
    assert!(
        (a[0].range_m - b[0].range_m).abs() < 1e-3,
        "{} {}",
        a[0].range_m,
        b[0].range_m
    );
}

#[test]
fn empty_scene_gives_no_estimates() {
    let c = cfg(16);
    let mut s = scene(10.0, 1000.0);
    s.tags.clear();
    let sig: IqSignal<f64> = simulate_if_fast(&s, "r0", &c).unwrap();
    assert!(localize_all(&sig, &c, &IdTable::default(), 10.0).unwrap().is_empty());
}
