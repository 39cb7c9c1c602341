//! Scenario files: one TOML document describing the radar, the scene, the
//! processing options and the experiment plan.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hawkeye_core::localizer::{DetectOptions, ExtractOptions, IdEntry, IdTable, LocalizeOptions};
use hawkeye_core::scene::Scene;
use hawkeye_core::waveform::RadarConfig;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sweep::{resolve_path, SweepAxis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Master seed. Every trial derives its own noise and jitter streams
    /// from it; `scene.rng_seed` is overwritten per trial.
    pub seed: u64,
    pub radar_config: RadarConfig,
    pub scene: Scene,
    #[serde(default)]
    pub pipeline: Pipeline,
    #[serde(default)]
    pub plan: Plan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pipeline {
    pub pad_factor: usize,
    pub min_snr_db: f64,
    pub dynamic_range_db: f64,
    /// Parabolic peak refinement after the zero-padded argmax.
    pub refine: bool,
    pub subbin_refine: bool,
    /// Explicit ID table; defaults to the scene's tags at nominal `f_m`.
    pub id_table: Option<Vec<IdEntry>>,
    pub ppm_tolerance: f64,
    pub tolerance_hz: f64,
    pub calibration_m: BTreeMap<String, f64>,
    /// Simulate through the RF mixing oracle instead of the analytic path.
    pub oracle: bool,
    /// 1 for ranging only, 2 or 3 to solve positions from several radars.
    pub dims: usize,
    /// Point on the tag side when radars alone leave a mirror ambiguity.
    pub hint: Option<Vec<f64>>,
    /// Position each tag from one radar's range and array angle (2D).
    pub aoa: bool,
    /// Chirps between track updates; tracking is off when unset.
    pub track_stride: Option<usize>,
    /// Run the single-chirp baseline on the same captures.
    pub baseline: bool,
    /// Keep trial 0's symbol spectra in the run directory.
    pub dump_spectra: bool,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self {
            pad_factor: 128,
            min_snr_db: 10.0,
            dynamic_range_db: 100.0,
            refine: true,
            subbin_refine: false,
            id_table: None,
            ppm_tolerance: 500.0,
            tolerance_hz: 0.0,
            calibration_m: BTreeMap::new(),
            oracle: false,
            dims: 1,
            hint: None,
            aoa: false,
            track_stride: None,
            baseline: false,
            dump_spectra: false,
        }
    }
}

impl Pipeline {
    pub fn localize_options(&self) -> LocalizeOptions {
        LocalizeOptions {
            detect: DetectOptions {
                min_snr_db: self.min_snr_db,
                dynamic_range_db: self.dynamic_range_db,
                subbin_refine: self.subbin_refine,
            },
            extract: ExtractOptions {
                pad_factor: self.pad_factor,
                refine: self.refine,
            },
            calibration_m: self.calibration_m.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Plan {
    pub trials: usize,
    /// Each tag is displaced per trial by a uniform draw in
    /// `[-j, +j]` along every axis.
    pub position_jitter_m: [f64; 3],
    pub sweep: Vec<SweepAxis>,
}

impl Default for Plan {
    fn default() -> Self {
        Self {
            trials: 1,
            position_jitter_m: [0.0; 3],
            sweep: Vec::new(),
        }
    }
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub oracle: bool,
    pub pad_factor: Option<usize>,
    pub no_refine: bool,
    pub baseline: bool,
    pub dump_spectra: bool,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(p) = o.pad_factor {
            self.pipeline.pad_factor = p;
        }
        self.pipeline.oracle |= o.oracle;
        self.pipeline.refine &= !o.no_refine;
        self.pipeline.baseline |= o.baseline;
        self.pipeline.dump_spectra |= o.dump_spectra;
    }

    pub fn id_table(&self) -> IdTable {
        let base = match &self.pipeline.id_table {
            Some(entries) => IdTable::new(entries.clone()),
            None => IdTable::from_scene(&self.scene),
        };
        base.with_ppm_tolerance(self.pipeline.ppm_tolerance)
            .with_tolerance_hz(self.pipeline.tolerance_hz)
    }

    /// Checks everything that can be checked without simulating; errors name
    /// the offending field.
    pub fn validate(&self) -> Result<()> {
        self.radar_config
            .validate()
            .map_err(|e| invalid("radar_config", e.to_string()))?;
        self.scene.validate().map_err(|e| invalid("scene", e.to_string()))?;
        let p = &self.pipeline;
        let cfg = &self.radar_config;

        if p.pad_factor == 0 {
            return Err(invalid("pipeline.pad_factor", "must be at least 1"));
        }
        if !(1..=3).contains(&p.dims) {
            return Err(invalid("pipeline.dims", format!("must be 1, 2 or 3, got {}", p.dims)));
        }
        if p.dims >= 2 && !p.aoa && self.scene.radars.len() < 2 {
            return Err(invalid("pipeline.dims", "position solving needs at least two radars"));
        }
        if let Some(h) = &p.hint {
            if h.len() != p.dims {
                return Err(invalid(
                    "pipeline.hint",
                    format!("needs {} coordinates, got {}", p.dims, h.len()),
                ));
            }
        }
        if p.aoa {
            if p.dims != 2 {
                return Err(invalid(
                    "pipeline.aoa",
                    "angle-of-arrival positioning is planar; set dims = 2",
                ));
            }
            if let Some(r) = self.scene.radars.iter().find(|r| r.rx_antennas < 2) {
                return Err(invalid(
                    "pipeline.aoa",
                    format!("radar `{}` has a single receive element", r.id),
                ));
            }
        }
        if p.aoa && p.oracle {
            return Err(invalid(
                "pipeline.aoa",
                "the oracle channel simulates a single receive element",
            ));
        }
        if cfg.interchirp_gap_s != 0.0 && !p.oracle {
            return Err(invalid(
                "pipeline.oracle",
                "a configuration with inter-chirp gaps can only be simulated through the oracle",
            ));
        }
        if let Some(s) = p.track_stride {
            if s == 0 || s > cfg.num_chirps {
                return Err(invalid(
                    "pipeline.track_stride",
                    format!("must lie in 1..={}, got {s}", cfg.num_chirps),
                ));
            }
        }
        for id in p.calibration_m.keys() {
            if !self.id_table().entries.iter().any(|e| &e.tag_id == id) {
                return Err(invalid(
                    format!("pipeline.calibration_m.{id}"),
                    "no such tag in the ID table",
                ));
            }
        }
        self.id_table()
            .check_spacing(cfg)
            .map_err(|e| invalid("pipeline.id_table", e.to_string()))?;

        if self.plan.trials == 0 {
            return Err(invalid("plan.trials", "must be at least 1"));
        }
        if self
            .plan
            .position_jitter_m
            .iter()
            .any(|j| !(j.is_finite() && *j >= 0.0))
        {
            return Err(invalid("plan.position_jitter_m", "entries must be finite and >= 0"));
        }
        let tree = toml::Value::try_from(self)?;
        for (i, axis) in self.plan.sweep.iter().enumerate() {
            let path = format!("plan.sweep[{i}]");
            if axis.values.is_empty() {
                return Err(invalid(format!("{path}.values"), "needs at least one value"));
            }
            if axis.path.starts_with("plan.") {
                return Err(invalid(format!("{path}.path"), "the plan itself cannot be swept"));
            }
            if resolve_path(&tree, &axis.path).map_err(|m| invalid(format!("{path}.path"), m))? == 0 {
                return Err(invalid(
                    format!("{path}.path"),
                    format!("`{}` matches nothing", axis.path),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
seed = 1
[radar_config]
carrier_hz = 24.125e9
bandwidth_hz = 250e6
chirp_duration_s = 256e-6
sample_rate_hz = 4e6
num_chirps = 16
[scene]
radars = [{ id = "r0", position_m = [0.0, 0.0, 0.0] }]
tags = [{ id = "a", position_m = [10.0, 0.0, 0.0], fm_nominal_hz = 100341.796875 }]
"#;

    #[test]
    fn minimal_file_uses_defaults() {
        let sc = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(sc.pipeline.pad_factor, 128);
        assert_eq!(sc.plan.trials, 1);
        assert!(sc.pipeline.refine);
        assert_eq!(sc.id_table().entries.len(), 1);
    }

    #[test]
    fn round_trips_through_toml() {
        let sc = Scenario::from_toml_str(MINIMAL).unwrap();
        let again = Scenario::from_toml_str(&sc.to_toml_string().unwrap()).unwrap();
        assert_eq!(sc, again);
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = format!("{MINIMAL}\n[pipeline]\npad_factor = 0\n");
        let err = Scenario::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.starts_with("pipeline.pad_factor"), "{err}");

        let bad = format!("{MINIMAL}\n[pipeline.calibration_m]\nghost = 0.1\n");
        let err = Scenario::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.starts_with("pipeline.calibration_m.ghost"), "{err}");

        let bad = format!("{MINIMAL}\n[[plan.sweep]]\npath = \"scene.tags.*.nope\"\nvalues = [1]\n");
        let err = Scenario::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.starts_with("plan.sweep[0].path"), "{err}");

        let err = Scenario::from_toml_str(&MINIMAL.replace("seed = 1\n", ""))
            .unwrap_err()
            .to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let mut sc = Scenario::from_toml_str(MINIMAL).unwrap();
        sc.apply(&Overrides {
            seed: Some(9),
            pad_factor: Some(16),
            no_refine: true,
            oracle: true,
            ..Overrides::default()
        });
        assert_eq!((sc.seed, sc.pipeline.pad_factor), (9, 16));
        assert!(!sc.pipeline.refine && sc.pipeline.oracle);
    }
}
