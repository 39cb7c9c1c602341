use std::io::Write;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fft::FftEngine;
use crate::scalar::Real;
use crate::waveform::{IqSignal, RadarConfig};

/// Unitary DFT of a whole interrogation symbol.
///
/// Bin `k` sits at `k * bin_spacing_hz`; every `grid_stride`-th bin lies on
/// the `1/T` clutter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T: Real = f64> {
    bins: Vec<Complex<T>>,
    bin_spacing_hz: f64,
    grid_stride: usize,
    offset_scale: f64,
}

impl<T: Real> Spectrum<T> {
    pub fn new(bins: Vec<Complex<T>>, bin_spacing_hz: f64, grid_stride: usize) -> Result<Self> {
        if grid_stride == 0 || bins.is_empty() || !bins.len().is_multiple_of(grid_stride) {
            return Err(Error::Structure(format!(
                "spectrum length {} is not a positive multiple of the grid stride {grid_stride}",
                bins.len()
            )));
        }
        if !(bin_spacing_hz > 0.0 && bin_spacing_hz.is_finite()) {
            return Err(Error::Structure(format!(
                "bin spacing must be positive, got {bin_spacing_hz}"
            )));
        }
        Ok(Self {
            bins,
            bin_spacing_hz,
            grid_stride,
            offset_scale: 1.0,
        })
    }

    /// Sets the factor applied to reported modulation offsets. A symbol
    /// rebuilt from gapped chirps uses `T / (T + g)`.
    pub fn with_offset_scale(mut self, scale: f64) -> Self {
        self.offset_scale = scale;
        self
    }

    pub fn bins(&self) -> &[Complex<T>] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bin_spacing_hz(&self) -> f64 {
        self.bin_spacing_hz
    }

    pub fn grid_stride(&self) -> usize {
        self.grid_stride
    }

    pub fn offset_scale(&self) -> f64 {
        self.offset_scale
    }

    /// Number of grid bins, equal to the samples per chirp.
    pub fn samples_per_chirp(&self) -> usize {
        self.bins.len() / self.grid_stride
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.bin_spacing_hz * self.bins.len() as f64
    }

    pub fn freq_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_spacing_hz
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|z| z.norm_sqr().as_f64()).sum()
    }

    /// Power summed over every bin of each residue class modulo the grid
    /// stride.
    pub fn folded_powers(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid_stride];
        for (k, z) in self.bins.iter().enumerate() {
            out[k % self.grid_stride] += z.norm_sqr().as_f64();
        }
        out
    }

    /// `20 log10 |X|`, with empty bins reported at -400 dB.
    pub fn magnitude_db(&self) -> Vec<f64> {
        self.bins
            .iter()
            .map(|z| 20.0 * z.norm().as_f64().max(1e-20).log10())
            .collect()
    }

    /// Values on the clutter grid after shifting residue `q` down to it.
    pub fn grid_values(&self, q: usize) -> Vec<Complex<T>> {
        self.bins.iter().skip(q).step_by(self.grid_stride).copied().collect()
    }

    pub(crate) fn with_bins(&self, bins: Vec<Complex<T>>) -> Self {
        Self {
            bins,
            bin_spacing_hz: self.bin_spacing_hz,
            grid_stride: self.grid_stride,
            offset_scale: self.offset_scale,
        }
    }

    pub(crate) fn check_against(&self, cfg: &RadarConfig) -> Result<()> {
        if self.grid_stride != cfg.num_chirps || self.samples_per_chirp() != cfg.samples_per_chirp() {
            return Err(Error::Structure(format!(
                "spectrum of {} x {} bins does not match a configuration of {} chirps x {} samples",
                self.grid_stride,
                self.samples_per_chirp(),
                cfg.num_chirps,
                cfg.samples_per_chirp()
            )));
        }
        Ok(())
    }

    /// Writes `bin_index,freq_hz,mag_db` rows for every bin.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_index,freq_hz,mag_db")?;
        for (k, db) in self.magnitude_db().into_iter().enumerate() {
            writeln!(out, "{k},{},{db:.6}", self.freq_hz(k))?;
        }
        Ok(())
    }
}

pub(crate) fn spectrum_with<T: Real>(
    engine: &FftEngine<T>,
    sig: &IqSignal<T>,
    cfg: &RadarConfig,
) -> Result<Spectrum<T>> {
    cfg.validate()?;
    if sig.len() != cfg.symbol_len() {
        return Err(Error::Structure(format!(
            "signal has {} samples, the symbol needs {} x {} = {}",
            sig.len(),
            cfg.num_chirps,
            cfg.samples_per_chirp(),
            cfg.symbol_len()
        )));
    }
    let mut bins = sig.samples().to_vec();
    engine.forward_unitary(&mut bins);
    Ok(Spectrum::new(bins, cfg.bin_spacing_hz(), cfg.num_chirps)?.with_offset_scale(1.0 / cfg.gap_stretch()))
}

/// Unitary DFT of the full `N`-chirp symbol.
pub fn if_spectrum<T: Real>(sig: &IqSignal<T>, cfg: &RadarConfig) -> Result<Spectrum<T>> {
    spectrum_with(&FftEngine::new(), sig, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> RadarConfig {
        RadarConfig {
            carrier_hz: 24e9,
            bandwidth_hz: 250e6,
            chirp_duration_s: 64e-6,
            sample_rate_hz: 1e6,
            num_chirps: 8,
            interchirp_gap_s: 0.0,
            tx_power_dbm: 0.0,
        }
    }

    fn tone(cfg: &RadarConfig, f: f64) -> IqSignal<f64> {
        let fs = cfg.sample_rate_hz;
        let s = (0..cfg.symbol_len())
            .map(|i| Complex::from_polar(1.0, 2.0 * PI * f * i as f64 / fs))
            .collect();
        IqSignal::new(s, fs, 0.0).unwrap()
    }

    #[test]
    fn on_grid_tone_lands_in_one_bin() {
        let c = cfg();
        let m = 37;
        let spec = if_spectrum(&tone(&c, m as f64 * c.bin_spacing_hz()), &c).unwrap();
        let total = spec.energy();
        for (k, z) in spec.bins().iter().enumerate() {
            if k == m {
                assert!((z.norm_sqr() - total).abs() < 1e-9 * total);
            } else {
                assert!(z.norm_sqr() < 1e-20 * total, "bin {k}");
            }
        }
    }

    #[test]
    fn parseval_holds() {
        let c = cfg();
        let sig = tone(&c, 1234.5);
        let spec = if_spectrum(&sig, &c).unwrap();
        assert!((spec.energy() - sig.energy()).abs() < 1e-9 * sig.energy());
        assert!((spec.bin_spacing_hz() * spec.len() as f64 - c.sample_rate_hz).abs() < 1e-6);
    }

    #[test]
    fn wrong_length_is_structural() {
        let c = cfg();
        let sig = IqSignal::new(vec![Complex::new(1.0, 0.0); 10], c.sample_rate_hz, 0.0).unwrap();
        assert!(matches!(if_spectrum(&sig, &c), Err(Error::Structure(_))));
    }

    #[test]
    fn csv_has_one_row_per_bin() {
        let c = cfg();
        let spec = if_spectrum(&tone(&c, 0.0), &c).unwrap();
        let mut buf = Vec::new();
        spec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), spec.len() + 1);
        assert!(text.starts_with("bin_index,freq_hz,mag_db\n0,0,"));
    }
}
