//! Mapping detected residues back to tag identities.

use serde::{Deserialize, Serialize};

use super::detect::TagDetection;
use crate::error::{Error, Result};
use crate::scene::{Scene, TagSpec};
use crate::waveform::RadarConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdEntry {
    pub tag_id: String,
    /// Nominal modulation frequency.
    pub fm_hz: f64,
}

fn default_ppm() -> f64 {
    500.0
}

/// Known tag modulation frequencies and the drift window around each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdTable {
    pub entries: Vec<IdEntry>,
    /// Oscillator drift tolerated around each nominal frequency.
    #[serde(default = "default_ppm")]
    pub ppm_tolerance: f64,
    /// Extra absolute tolerance, e.g. for Doppler.
    #[serde(default)]
    pub tolerance_hz: f64,
}

impl Default for IdTable {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            ppm_tolerance: default_ppm(),
            tolerance_hz: 0.0,
        }
    }
}

/// Harmonic multiples of a resolved fundamental that are treated as
/// artefacts of the square-wave modulation.
const GHOST_MULTIPLES: [f64; 5] = [-1.0, 3.0, -3.0, 5.0, -5.0];

/// Identity of one detection after resolution.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Resolution {
    pub detection: TagDetection,
    pub tag_id: Option<String>,
    /// Full apparent modulation frequency (on the gap-free timeline).
    pub fm_apparent_hz: f64,
    pub ambiguous: bool,
}

/// Signed circular difference `a - b` modulo `n`, in `(-n/2, n/2]`.
fn circ(a: f64, b: f64, n: f64) -> f64 {
    let d = (a - b).rem_euclid(n);
    if d > n / 2.0 {
        d - n
    } else {
        d
    }
}

impl IdTable {
    pub fn new(entries: Vec<IdEntry>) -> Self {
        Self {
            entries,
            ..Self::default()
        }
    }

    pub fn with_ppm_tolerance(mut self, ppm: f64) -> Self {
        self.ppm_tolerance = ppm;
        self
    }

    pub fn with_tolerance_hz(mut self, hz: f64) -> Self {
        self.tolerance_hz = hz;
        self
    }

    /// Table of every tag's nominal modulation frequency.
    pub fn from_tags<'a>(tags: impl IntoIterator<Item = &'a TagSpec>) -> Self {
        Self::new(
            tags.into_iter()
                .map(|t| IdEntry {
                    tag_id: t.id.clone(),
                    fm_hz: t.fm_nominal_hz,
                })
                .collect(),
        )
    }

    pub fn from_scene(scene: &Scene) -> Self {
        Self::from_tags(&scene.tags)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Residue (fractional bins) and tolerance (bins) of an entry.
    fn window(&self, e: &IdEntry, cfg: &RadarConfig) -> (f64, f64) {
        let bs = cfg.bin_spacing_hz();
        let stretch = cfg.gap_stretch();
        let app = e.fm_hz * stretch;
        let residue = (app / bs).rem_euclid(cfg.num_chirps as f64);
        let tol = (app * self.ppm_tolerance.abs() * 1e-6 + self.tolerance_hz.abs() * stretch) / bs + 0.5;
        (residue, tol)
    }

    /// Rejects tables whose drift windows overlap each other or cover the
    /// clutter residue.
    pub fn check_spacing(&self, cfg: &RadarConfig) -> Result<()> {
        let n = cfg.num_chirps as f64;
        let windows: Vec<(f64, f64)> = self.entries.iter().map(|e| self.window(e, cfg)).collect();
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.fm_hz > 0.0 && e.fm_hz.is_finite()) {
                return Err(Error::Config(format!(
                    "ID `{}` needs a positive modulation frequency",
                    e.tag_id
                )));
            }
            let (ri, ti) = windows[i];
            if circ(ri, 0.0, n).abs() < ti {
                return Err(Error::Config(format!(
                    "ID `{}` ({} Hz) falls within {:.2} bins of the clutter grid",
                    e.tag_id, e.fm_hz, ti
                )));
            }
            for (j, f) in self.entries.iter().enumerate().skip(i + 1) {
                let (rj, tj) = windows[j];
                if f.tag_id == e.tag_id {
                    return Err(Error::Config(format!("ID `{}` listed twice", e.tag_id)));
                }
                if circ(ri, rj, n).abs() < ti.max(tj) {
                    return Err(Error::Config(format!(
                        "IDs `{}` and `{}` are closer than their drift windows ({:.2} bins apart)",
                        e.tag_id,
                        f.tag_id,
                        circ(ri, rj, n).abs()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Assigns identities to detections, flags detections that claim the
    /// same identity, and drops mirror and odd-harmonic images of resolved
    /// tags.
    pub(crate) fn resolve(&self, detections: &[TagDetection], cfg: &RadarConfig) -> Vec<Resolution> {
        let n = cfg.num_chirps as f64;
        let bs = cfg.bin_spacing_hz();
        let stretch = cfg.gap_stretch();

        let mut matches: Vec<Option<(usize, f64)>> = detections
            .iter()
            .map(|d| {
                let q = d.fine_offset_bins();
                self.entries
                    .iter()
                    .enumerate()
                    .filter_map(|(i, e)| {
                        let (r, tol) = self.window(e, cfg);
                        let dist = circ(q, r, n);
                        (dist.abs() <= tol).then_some((i, dist))
                    })
                    .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(a.0.cmp(&b.0)))
            })
            .collect();

        // full apparent frequency of every directly resolved detection
        let fundamentals: Vec<(f64, f64)> = matches
            .iter()
            .flatten()
            .map(|&(i, dist)| {
                let e = &self.entries[i];
                let (_, tol) = self.window(e, cfg);
                (e.fm_hz * stretch + dist * bs, tol)
            })
            .collect();

        let mut keep = vec![true; detections.len()];
        for (k, d) in detections.iter().enumerate() {
            if matches[k].is_some() {
                continue;
            }
            let q = d.fine_offset_bins();
            let ghost = fundamentals.iter().any(|&(f, tol)| {
                GHOST_MULTIPLES.iter().any(|&m| {
                    let r = (m * f / bs).rem_euclid(n);
                    circ(q, r, n).abs() <= m.abs() * tol
                })
            });
            if ghost {
                keep[k] = false;
            }
        }

        let mut counts = vec![0usize; self.entries.len()];
        for m in matches.iter().flatten() {
            counts[m.0] += 1;
        }

        detections
            .iter()
            .zip(matches.iter_mut())
            .zip(keep)
            .filter(|(_, keep)| *keep)
            .map(|((d, m), _)| match m.take() {
                Some((i, dist)) => Resolution {
                    detection: d.clone(),
                    tag_id: Some(self.entries[i].tag_id.clone()),
                    fm_apparent_hz: self.entries[i].fm_hz * stretch + dist * bs,
                    ambiguous: counts[i] > 1,
                },
                None => Resolution {
                    detection: d.clone(),
                    tag_id: None,
                    fm_apparent_hz: d.fine_offset_bins() * bs,
                    ambiguous: false,
                },
            })
            .collect()
    }
}
