//! Raw IF dumps: little-endian interleaved `f32` I/Q plus a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::waveform::{IqSignal, RadarConfig};

pub const IF_DUMP_FORMAT: &str = "cf32le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfDumpMeta {
    pub format: String,
    pub sample_rate_hz: f64,
    pub t0_s: f64,
    pub num_samples: usize,
    pub radar_id: String,
    pub antenna: usize,
    pub radar_config: RadarConfig,
}

fn paths(prefix: &Path) -> (PathBuf, PathBuf) {
    (prefix.with_extension("iq"), prefix.with_extension("json"))
}

/// Writes `<prefix>.iq` and `<prefix>.json`.
pub fn write_if_dump<T: Real>(
    prefix: &Path,
    sig: &IqSignal<T>,
    cfg: &RadarConfig,
    radar_id: &str,
    antenna: usize,
) -> Result<()> {
    let (iq, meta_path) = paths(prefix);
    let mut bytes = Vec::with_capacity(sig.len() * 8);
    for z in sig.samples() {
        bytes.extend_from_slice(&(z.re.as_f64() as f32).to_le_bytes());
        bytes.extend_from_slice(&(z.im.as_f64() as f32).to_le_bytes());
    }
    fs::write(iq, bytes)?;
    let meta = IfDumpMeta {
        format: IF_DUMP_FORMAT.into(),
        sample_rate_hz: sig.sample_rate_hz(),
        t0_s: sig.t0_s(),
        num_samples: sig.len(),
        radar_id: radar_id.into(),
        antenna,
        radar_config: cfg.clone(),
    };
    fs::write(meta_path, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_if_dump<T: Real>(prefix: &Path) -> Result<(IqSignal<T>, IfDumpMeta)> {
    let (iq, meta_path) = paths(prefix);
    let meta: IfDumpMeta = serde_json::from_str(&fs::read_to_string(meta_path)?)?;
    if meta.format != IF_DUMP_FORMAT {
        return Err(Error::Structure(format!(
            "unsupported IF dump format `{}`",
            meta.format
        )));
    }
    let bytes = fs::read(iq)?;
    if bytes.len() != meta.num_samples * 8 {
        return Err(Error::Structure(format!(
            "IF dump holds {} bytes, sidecar promises {} samples",
            bytes.len(),
            meta.num_samples
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex::new(T::lit(re as f64), T::lit(im as f64))
        })
        .collect();
    let sig = IqSignal::new(samples, meta.sample_rate_hz, meta.t0_s)?;
    Ok((sig, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_interleaved_little_endian() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("r0");
        let sig = IqSignal::<f64>::new(vec![Complex::new(1.0, -2.0), Complex::new(0.5, 0.25)], 2e6, 0.0).unwrap();
        let cfg = RadarConfig::tinyrad_24ghz();
        write_if_dump(&prefix, &sig, &cfg, "r0", 0).unwrap();
        let raw = std::fs::read(prefix.with_extension("iq")).unwrap();
        assert_eq!(&raw[0..4], &1.0f32.to_le_bytes());
        assert_eq!(&raw[4..8], &(-2.0f32).to_le_bytes());
        let (back, meta) = read_if_dump::<f64>(&prefix).unwrap();
        assert_eq!(back, sig);
        assert_eq!(meta.sample_rate_hz, 2e6);
        assert_eq!(meta.radar_config, cfg);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("r0");
        let sig = IqSignal::<f64>::new(vec![Complex::new(1.0, 0.0); 4], 1e6, 0.0).unwrap();
        write_if_dump(&prefix, &sig, &RadarConfig::tinyrad_24ghz(), "r0", 0).unwrap();
        std::fs::write(prefix.with_extension("iq"), [0u8; 12]).unwrap();
        assert!(matches!(read_if_dump::<f64>(&prefix), Err(Error::Structure(_))));
    }
}
