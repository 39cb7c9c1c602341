//! One-shot ranging of every tag in an HD-FMCW capture.
//!
//! Static reflections of a symbol made of `N` identical chirps are exactly
//! `T`-periodic, so their spectrum only occupies every `N`-th bin. A tag's
//! modulation offsets its comb to another residue. The pipeline finds those
//! residues ([`detect_fm`]), moves one back onto the emptied grid
//! ([`isolate_tag`]) and reads the range frequency off the centre of the
//! sinc envelope traced by the grid peaks ([`extract_fr`]).

mod baseline;
mod detect;
mod extract;
mod ids;
mod spectrum;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baseline::{baseline_fmcw_range, baseline_fmcw_range_demod};
pub use detect::{detect_fm, detect_fm_with, DetectOptions, TagDetection};
pub use extract::{extract_fr, extract_fr_with, fr_to_range, isolate_tag, ExtractOptions};
pub use ids::{IdEntry, IdTable};
pub use spectrum::{if_spectrum, Spectrum};

pub(crate) use extract::{fold_range_frequency, isolate_band, window_peak};
pub(crate) use spectrum::spectrum_with;

use crate::error::Result;
use crate::fft::FftEngine;
use crate::scalar::Real;
use crate::waveform::{IqSignal, RadarConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    /// Identity from the ID table, if one matched.
    pub tag_id: Option<String>,
    pub offset_bins: usize,
    /// Full modulation frequency (plus any Doppler) implied by the residue.
    pub fm_detected_hz: f64,
    pub fr_hz: f64,
    pub range_m: f64,
    pub snr_db: f64,
    /// Another detection resolved to the same identity.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizeOptions {
    pub detect: DetectOptions,
    pub extract: ExtractOptions,
    /// Constant range offset per tag id, subtracted from its estimate.
    pub calibration_m: BTreeMap<String, f64>,
}

/// Reusable pipeline holding FFT plans.
pub struct Localizer<T: Real = f64> {
    engine: FftEngine<T>,
    pub options: LocalizeOptions,
}

impl<T: Real> Default for Localizer<T> {
    fn default() -> Self {
        Self::new(LocalizeOptions::default())
    }
}

impl<T: Real> Localizer<T> {
    pub fn new(options: LocalizeOptions) -> Self {
        Self {
            engine: FftEngine::new(),
            options,
        }
    }

    pub fn spectrum(&self, sig: &IqSignal<T>, cfg: &RadarConfig) -> Result<Spectrum<T>> {
        spectrum_with(&self.engine, sig, cfg)
    }

    pub fn localize(&self, sig: &IqSignal<T>, cfg: &RadarConfig, ids: &IdTable) -> Result<Vec<RangeEstimate>> {
        let spec = self.spectrum(sig, cfg)?;
        self.localize_spectrum(&spec, cfg, ids)
    }

    pub fn localize_spectrum(
        &self,
        spec: &Spectrum<T>,
        cfg: &RadarConfig,
        ids: &IdTable,
    ) -> Result<Vec<RangeEstimate>> {
        spec.check_against(cfg)?;
        ids.check_spacing(cfg)?;
        let detections = detect_fm_with(spec, &self.options.detect);
        let resolved = ids.resolve(&detections, cfg);
        let fs = cfg.sample_rate_hz;
        let bs = cfg.bin_spacing_hz();
        let t = cfg.chirp_duration_s;

        let mut out = resolved
            .into_par_iter()
            .map(|res| {
                let det = &res.detection;
                let q = det.offset_bins;
                let mut window = spec.grid_values(q);
                self.engine.inverse_unitary(&mut window);
                let peak = window_peak(&self.engine, &window, fs, &self.options.extract)?;
                // the comb sits K grid lines above the residue actually shifted
                let k = ((res.fm_apparent_hz - det.fine_offset_bins() * bs) * t).round();
                let mut fr = fold_range_frequency(peak.freq_hz - k / t - det.fraction_bins * bs, fs);
                if let Some(cal) = res.tag_id.as_ref().and_then(|id| self.options.calibration_m.get(id)) {
                    fr = (fr - cfg.range_frequency_hz(*cal)).max(0.0);
                }
                Ok(RangeEstimate {
                    tag_id: res.tag_id,
                    offset_bins: q,
                    fm_detected_hz: res.fm_apparent_hz / cfg.gap_stretch(),
                    fr_hz: fr,
                    range_m: fr_to_range(fr, cfg)?,
                    snr_db: det.snr_db,
                    ambiguous: res.ambiguous,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.sort_by_key(|e| e.offset_bins);
        Ok(out)
    }
}

/// Detects, identifies and ranges every tag in one capture.
pub fn localize_all<T: Real>(
    sig: &IqSignal<T>,
    cfg: &RadarConfig,
    id_table: &IdTable,
    min_snr_db: f64,
) -> Result<Vec<RangeEstimate>> {
    let mut options = LocalizeOptions::default();
    options.detect.min_snr_db = min_snr_db;
    Localizer::new(options).localize(sig, cfg, id_table)
}
