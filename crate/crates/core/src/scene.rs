//! Declarative 3D world: radars, tags, clutter, multipath taps and noise.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::RadarConfig;

pub type Vec3 = [f64; 3];

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn finite(v: Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn default_antennas() -> usize {
    1
}

fn default_axis() -> Vec3 {
    [0.0, 1.0, 0.0]
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarNode {
    pub id: String,
    pub position_m: Vec3,
    /// Receive elements of the uniform linear array; element 0 sits at
    /// `position_m` and is co-located with the transmitter.
    #[serde(default = "default_antennas")]
    pub rx_antennas: usize,
    #[serde(default)]
    pub antenna_spacing_m: f64,
    /// Direction the array extends along. Angles of arrival are measured from
    /// broadside, positive towards this axis.
    #[serde(default = "default_axis")]
    pub array_axis: Vec3,
    /// Overrides the scene noise model for this radar.
    #[serde(default)]
    pub noise_floor_dbm: Option<f64>,
}

impl RadarNode {
    pub fn at(id: impl Into<String>, position_m: Vec3) -> Self {
        Self {
            id: id.into(),
            position_m,
            rx_antennas: 1,
            antenna_spacing_m: 0.0,
            array_axis: default_axis(),
            noise_floor_dbm: None,
        }
    }

    fn unit_axis(&self) -> Vec3 {
        let n = norm(self.array_axis);
        [self.array_axis[0] / n, self.array_axis[1] / n, self.array_axis[2] / n]
    }

    /// Position of receive element `m`.
    pub fn rx_position(&self, m: usize) -> Vec3 {
        let u = self.unit_axis();
        let d = m as f64 * self.antenna_spacing_m;
        [
            self.position_m[0] + d * u[0],
            self.position_m[1] + d * u[1],
            self.position_m[2] + d * u[2],
        ]
    }

    /// Angle of `point` from array broadside: `asin(u . axis)` where `u` is
    /// the unit vector from the radar to the point.
    pub fn angle_to(&self, point: Vec3) -> f64 {
        let d = sub(point, self.position_m);
        (dot(d, self.unit_axis()) / norm(d)).clamp(-1.0, 1.0).asin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSpec {
    pub id: String,
    pub position_m: Vec3,
    #[serde(default)]
    pub velocity_mps: Vec3,
    pub fm_nominal_hz: f64,
    #[serde(default)]
    pub fm_ppm_offset: f64,
    #[serde(default = "default_amplitude")]
    pub reflect_amplitude: f64,
    /// Initial phase of the modulation square wave.
    #[serde(default)]
    pub phase_rad: f64,
    /// Extra one-way loss on the line of sight (cardboard, plywood, ...).
    #[serde(default)]
    pub blockage_db: f64,
}

impl TagSpec {
    pub fn new(id: impl Into<String>, position_m: Vec3, fm_nominal_hz: f64) -> Self {
        Self {
            id: id.into(),
            position_m,
            velocity_mps: [0.0; 3],
            fm_nominal_hz,
            fm_ppm_offset: 0.0,
            reflect_amplitude: 1.0,
            phase_rad: 0.0,
            blockage_db: 0.0,
        }
    }

    pub fn position_at(&self, t: f64) -> Vec3 {
        [
            self.position_m[0] + self.velocity_mps[0] * t,
            self.position_m[1] + self.velocity_mps[1] * t,
            self.position_m[2] + self.velocity_mps[2] * t,
        ]
    }

    pub fn is_static(&self) -> bool {
        self.velocity_mps.iter().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterSpec {
    pub position_m: Vec3,
    pub reflect_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathTap {
    pub tag_id: String,
    /// Extra round-trip path length relative to the line of sight.
    pub excess_path_m: f64,
    pub attenuation_db: f64,
}

/// Receiver noise model. Powers are in the same units as the received
/// amplitudes squared, i.e. milliwatts when `tx_power_dbm` is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    Off,
    /// Per-sample SNR of a unit-amplitude reflector at 1 m.
    ReferenceSnr { snr_db: f64 },
    /// Absolute noise power per sample.
    FloorDbm { dbm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub radars: Vec<RadarNode>,
    #[serde(default)]
    pub tags: Vec<TagSpec>,
    #[serde(default)]
    pub clutter: Vec<ClutterSpec>,
    #[serde(default)]
    pub multipath: Vec<MultipathTap>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub rng_seed: u64,
}

/// Something in the scene a range can be measured to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectorRef<'a> {
    Tag(&'a str),
    Clutter(usize),
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        let mut radar_ids = HashSet::new();
        for r in &self.radars {
            if !radar_ids.insert(r.id.as_str()) {
                return Err(Error::Scene(format!("duplicate radar id `{}`", r.id)));
            }
            if !finite(r.position_m) {
                return Err(Error::Scene(format!("radar `{}` position is not finite", r.id)));
            }
            if r.rx_antennas == 0 {
                return Err(Error::Scene(format!("radar `{}` has no receive antennas", r.id)));
            }
            if r.rx_antennas > 1 && !(r.antenna_spacing_m > 0.0) {
                return Err(Error::Scene(format!(
                    "radar `{}` has {} antennas but spacing {}",
                    r.id, r.rx_antennas, r.antenna_spacing_m
                )));
            }
            if r.rx_antennas > 1 && !(norm(r.array_axis) > 0.0 && finite(r.array_axis)) {
                return Err(Error::Scene(format!("radar `{}` array axis is degenerate", r.id)));
            }
        }
        let mut tag_ids = HashSet::new();
        for t in &self.tags {
            if !tag_ids.insert(t.id.as_str()) {
                return Err(Error::Scene(format!("duplicate tag id `{}`", t.id)));
            }
            if !finite(t.position_m) || !finite(t.velocity_mps) {
                return Err(Error::Scene(format!("tag `{}` kinematics are not finite", t.id)));
            }
            if !(t.fm_nominal_hz > 0.0 && t.fm_nominal_hz.is_finite()) {
                return Err(Error::Scene(format!(
                    "tag `{}` modulation frequency must be positive",
                    t.id
                )));
            }
            if !(t.fm_ppm_offset.abs() <= 1000.0) {
                return Err(Error::Scene(format!(
                    "tag `{}` ppm offset {} exceeds +/-1000",
                    t.id, t.fm_ppm_offset
                )));
            }
            if !(t.reflect_amplitude > 0.0 && t.reflect_amplitude.is_finite()) {
                return Err(Error::Scene(format!("tag `{}` amplitude must be positive", t.id)));
            }
            if !(t.blockage_db >= 0.0) {
                return Err(Error::Scene(format!("tag `{}` blockage must be >= 0 dB", t.id)));
            }
        }
        for (i, c) in self.clutter.iter().enumerate() {
            if !finite(c.position_m) {
                return Err(Error::Scene(format!("clutter {i} position is not finite")));
            }
            if !(c.reflect_amplitude > 0.0 && c.reflect_amplitude.is_finite()) {
                return Err(Error::Scene(format!("clutter {i} amplitude must be positive")));
            }
        }
        for tap in &self.multipath {
            if !tag_ids.contains(tap.tag_id.as_str()) {
                return Err(Error::Scene(format!(
                    "multipath tap references unknown tag `{}`",
                    tap.tag_id
                )));
            }
            if !(tap.excess_path_m > 0.0) {
                return Err(Error::Scene(format!(
                    "multipath tap for `{}` needs a positive excess path",
                    tap.tag_id
                )));
            }
            if !(tap.attenuation_db >= 0.0) {
                return Err(Error::Scene(format!(
                    "multipath tap for `{}` has negative attenuation",
                    tap.tag_id
                )));
            }
        }
        match self.noise {
            NoiseSpec::ReferenceSnr { snr_db } if !snr_db.is_finite() => {
                return Err(Error::Scene("reference SNR must be finite".into()))
            }
            NoiseSpec::FloorDbm { dbm } if !dbm.is_finite() => {
                return Err(Error::Scene("noise floor must be finite".into()))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn radar(&self, id: &str) -> Result<&RadarNode> {
        self.radars.iter().find(|r| r.id == id).ok_or_else(|| Error::UnknownId {
            kind: "radar",
            id: id.to_string(),
        })
    }

    pub fn tag(&self, id: &str) -> Result<&TagSpec> {
        self.tags.iter().find(|t| t.id == id).ok_or_else(|| Error::UnknownId {
            kind: "tag",
            id: id.to_string(),
        })
    }

    /// Noise power per sample seen by `radar`, or `None` when noiseless.
    pub fn noise_power(&self, radar: &RadarNode, cfg: &RadarConfig) -> Option<f64> {
        if let Some(dbm) = radar.noise_floor_dbm {
            return Some(db_to_power(dbm));
        }
        match self.noise {
            NoiseSpec::Off => None,
            NoiseSpec::ReferenceSnr { snr_db } => Some(db_to_power(cfg.tx_power_dbm) * db_to_power(-snr_db)),
            NoiseSpec::FloorDbm { dbm } => Some(db_to_power(dbm)),
        }
    }

    /// Line-of-sight IF amplitude of `tag` at `radar` (element 0) at time
    /// `t`: `sqrt(P_tx) * a / R^2`, times the blockage loss. Square-wave
    /// modulation scaling is not included.
    pub fn tag_amplitude(&self, radar: &RadarNode, tag: &TagSpec, cfg: &RadarConfig, t: f64) -> f64 {
        let r = norm(sub(tag.position_at(t), radar.position_m));
        db_to_power(cfg.tx_power_dbm).sqrt() * tag.reflect_amplitude * db_to_amplitude(-tag.blockage_db) / (r * r)
    }
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Euclidean distance from `radar_id` to a reflector at time `t`, under the
/// constant-velocity motion model.
pub fn range_at(scene: &Scene, radar_id: &str, reflector: ReflectorRef<'_>, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be >= 0, got {t}")));
    }
    let radar = scene.radar(radar_id)?;
    let p = match reflector {
        ReflectorRef::Tag(id) => scene.tag(id)?.position_at(t),
        ReflectorRef::Clutter(i) => {
            scene
                .clutter
                .get(i)
                .ok_or_else(|| Error::UnknownId {
                    kind: "clutter",
                    id: i.to_string(),
                })?
                .position_m
        }
    };
    Ok(norm(sub(p, radar.position_m)))
}

/// Time derivative of [`range_at`] for a tag (positive when receding).
pub fn range_rate_at(scene: &Scene, radar_id: &str, tag_id: &str, t: f64) -> Result<f64> {
    let radar = scene.radar(radar_id)?;
    let tag = scene.tag(tag_id)?;
    let d = sub(tag.position_at(t), radar.position_m);
    let r = norm(d);
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(dot(d, tag.velocity_mps) / r)
}

/// The tag's actual modulation frequency including oscillator drift.
pub fn effective_fm(tag: &TagSpec) -> f64 {
    tag.fm_nominal_hz * (1.0 + tag.fm_ppm_offset * 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> Scene {
        Scene {
            radars: vec![RadarNode::at("r0", [0.0; 3])],
            tags: vec![TagSpec::new("t0", [3.0, 4.0, 0.0], 50e3)],
            clutter: vec![ClutterSpec {
                position_m: [0.0, 0.0, 2.0],
                reflect_amplitude: 5.0,
            }],
            multipath: vec![],
            noise: NoiseSpec::Off,
            rng_seed: 7,
        }
    }

    #[test]
    fn static_range_is_constant() {
        let s = scene();
        for t in [0.0, 0.5, 10.0] {
            assert_eq!(range_at(&s, "r0", ReflectorRef::Tag("t0"), t).unwrap(), 5.0);
        }
        assert_eq!(range_at(&s, "r0", ReflectorRef::Clutter(0), 1.0).unwrap(), 2.0);
    }

    #[test]
    fn linear_motion() {
        let mut s = scene();
        s.tags[0].position_m = [10.0, 0.0, 0.0];
        s.tags[0].velocity_mps = [0.17, 0.0, 0.0];
        let r = range_at(&s, "r0", ReflectorRef::Tag("t0"), 1.0).unwrap();
        assert!((r - 10.17).abs() < 1e-12);
        assert!((range_rate_at(&s, "r0", "t0", 1.0).unwrap() - 0.17).abs() < 1e-12);
    }

    #[test]
    fn tangential_motion_has_zero_range_rate_at_closest_approach() {
        let mut s = scene();
        s.tags[0].position_m = [5.0, 0.0, 0.0];
        s.tags[0].velocity_mps = [0.0, 1.0, 0.0];
        assert_eq!(range_rate_at(&s, "r0", "t0", 0.0).unwrap(), 0.0);
    }

    #[test]
    fn lookups_fail_on_unknown_ids() {
        let s = scene();
        assert!(matches!(
            range_at(&s, "nope", ReflectorRef::Tag("t0"), 0.0),
            Err(Error::UnknownId { kind: "radar", .. })
        ));
        assert!(matches!(
            range_at(&s, "r0", ReflectorRef::Tag("x"), 0.0),
            Err(Error::UnknownId { kind: "tag", .. })
        ));
        assert!(matches!(
            range_at(&s, "r0", ReflectorRef::Clutter(3), 0.0),
            Err(Error::UnknownId { kind: "clutter", .. })
        ));
    }

    #[test]
    fn effective_fm_applies_ppm() {
        let mut t = TagSpec::new("a", [0.0; 3], 50e3);
        t.fm_ppm_offset = 500.0;
        assert!((effective_fm(&t) - 50_025.0).abs() < 1e-9);
        t.fm_nominal_hz = 150e3;
        t.fm_ppm_offset = 0.0;
        assert_eq!(effective_fm(&t), 150_000.0);
        t.fm_nominal_hz = 134.2e3;
        t.fm_ppm_offset = -20.0;
        assert!((effective_fm(&t) - 134_197.316).abs() < 1e-6);
    }

    #[test]
    fn validation_rejects_duplicates_and_dangling_taps() {
        let mut s = scene();
        s.tags.push(s.tags[0].clone());
        assert!(matches!(s.validate(), Err(Error::Scene(m)) if m.contains("duplicate tag")));

        let mut s = scene();
        s.radars.push(RadarNode::at("r0", [1.0, 0.0, 0.0]));
        assert!(matches!(s.validate(), Err(Error::Scene(m)) if m.contains("duplicate radar")));

        let mut s = scene();
        s.multipath.push(MultipathTap {
            tag_id: "ghost".into(),
            excess_path_m: 1.0,
            attenuation_db: 20.0,
        });
        assert!(matches!(s.validate(), Err(Error::Scene(m)) if m.contains("unknown tag")));

        let mut s = scene();
        s.tags[0].position_m[1] = f64::NAN;
        assert!(s.validate().is_err());

        let mut s = scene();
        s.tags[0].fm_ppm_offset = 1500.0;
        assert!(s.validate().is_err());

        scene().validate().unwrap();
    }

    #[test]
    fn trajectories_do_not_depend_on_query_order() {
        let mut s = scene();
        s.tags[0].velocity_mps = [0.3, -0.1, 0.05];
        let times = [3.0, 0.1, 7.5, 0.1, 3.0];
        let a: Vec<f64> = times
            .iter()
            .map(|&t| range_at(&s, "r0", ReflectorRef::Tag("t0"), t).unwrap())
            .collect();
        assert_eq!(a[0], a[4]);
        assert_eq!(a[1], a[3]);
    }

    #[test]
    fn array_geometry() {
        let mut r = RadarNode::at("a", [0.0; 3]);
        r.rx_antennas = 2;
        r.antenna_spacing_m = 0.5;
        assert_eq!(r.rx_position(1), [0.0, 0.5, 0.0]);
        let a = r.angle_to([10.0 * 30f64.to_radians().cos(), 10.0 * 30f64.to_radians().sin(), 0.0]);
        assert!((a - 30f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn noise_power_precedence() {
        let mut s = scene();
        let cfg = RadarConfig::tinyrad_24ghz();
        assert_eq!(s.noise_power(&s.radars[0], &cfg), None);
        s.noise = NoiseSpec::ReferenceSnr { snr_db: 30.0 };
        let p = s.noise_power(&s.radars[0], &cfg).unwrap();
        assert!((p - db_to_power(8.0 - 30.0)).abs() < 1e-15);
        s.radars[0].noise_floor_dbm = Some(-90.0);
        assert!((s.noise_power(&s.radars[0], &cfg).unwrap() - 1e-9).abs() < 1e-20);
    }
}
