use std::f64::consts::PI;

use hawkeye_core::channel::simulate_if_fast;
use hawkeye_core::localizer::{if_spectrum, localize_all, IdTable};
use hawkeye_core::scene::{RadarNode, Scene, TagSpec};
use hawkeye_core::waveform::{IqSignal, RadarConfig};
use proptest::prelude::*;

fn cfg() -> RadarConfig {
    RadarConfig {
        carrier_hz: 24.125e9,
        bandwidth_hz: 250e6,
        chirp_duration_s: 256e-6,
        sample_rate_hz: 4e6,
        num_chirps: 16,
        interchirp_gap_s: 0.0,
        tx_power_dbm: 10.0,
    }
}

fn one_tag(tag: TagSpec) -> Scene {
    Scene {
        radars: vec![RadarNode::at("r0", [0.0; 3])],
        tags: vec![tag],
        clutter: vec![],
        multipath: vec![],
        noise: Default::default(),
        rng_seed: 0,
    }
}

fn estimate(scene: &Scene) -> f64 {
    let c = cfg();
    let sig: IqSignal<f64> = simulate_if_fast(scene, "r0", &c).unwrap();
    let est = localize_all(&sig, &c, &IdTable::from_scene(scene), 10.0).unwrap();
    assert_eq!(est.len(), 1);
    est[0].range_m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_preserves_energy(range in 1.0f64..100.0, amp in 0.1f64..10.0) {
        let c = cfg();
        let mut tag = TagSpec::new("t", [range, 0.0, 0.0], 301.0 * c.bin_spacing_hz());
        tag.reflect_amplitude = amp;
        let sig: IqSignal<f64> = simulate_if_fast(&one_tag(tag), "r0", &c).unwrap();
        let spec = if_spectrum(&sig, &c).unwrap();
        prop_assert!((spec.energy() - sig.energy()).abs() <= 1e-9 * sig.energy());
    }

    #[test]
    fn tag_phase_does_not_move_the_range(range in 2.0f64..100.0, phase in -PI..PI) {
        let fm = 301.0 * cfg().bin_spacing_hz();
        let a = estimate(&one_tag(TagSpec::new("t", [range, 0.0, 0.0], fm)));
        let mut tag = TagSpec::new("t", [range, 0.0, 0.0], fm);
        tag.phase_rad = phase;
        let b = estimate(&one_tag(tag));
        prop_assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }

    #[test]
    fn oscillator_drift_within_tolerance_is_harmless(range in 2.0f64..100.0, ppm in -300.0f64..300.0) {
        let fm = 301.0 * cfg().bin_spacing_hz();
        let mut tag = TagSpec::new("t", [range, 0.0, 0.0], fm);
        tag.fm_ppm_offset = ppm;
        let est = estimate(&one_tag(tag));
        prop_assert!((est - range).abs() < 5e-3, "{est} vs {range}");
    }

    #[test]
    fn moving_the_tag_shifts_the_estimate(range in 2.0f64..90.0, delta in 0.01f64..9.0) {
        let fm = 301.0 * cfg().bin_spacing_hz();
        let a = estimate(&one_tag(TagSpec::new("t", [range, 0.0, 0.0], fm)));
        let b = estimate(&one_tag(TagSpec::new("t", [range + delta, 0.0, 0.0], fm)));
        prop_assert!(((b - a) - delta).abs() < 2e-3, "{}", b - a - delta);
    }
}
