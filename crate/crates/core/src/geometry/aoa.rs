use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localizer::{if_spectrum, TagDetection};
use crate::scalar::Real;
use crate::scene::RadarNode;
use crate::waveform::{IqSignal, RadarConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaEstimate {
    /// Angle from array broadside, positive towards the array axis.
    pub angle_rad: f64,
    /// Set when the element spacing exceeds half a wavelength, so grating
    /// lobes make the angle one of several candidates.
    pub ambiguous: bool,
}

fn wrap(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Angle of arrival of the tag behind `det`, from the phase progression of
/// its comb line across the receive elements of `radar`.
pub fn estimate_aoa<T: Real>(
    signals: &[IqSignal<T>],
    cfg: &RadarConfig,
    det: &TagDetection,
    radar: &RadarNode,
) -> Result<AoaEstimate> {
    if signals.len() < 2 {
        return Err(Error::Precondition(format!(
            "angle of arrival needs at least two receive elements, got {}",
            signals.len()
        )));
    }
    if !(radar.antenna_spacing_m > 0.0) {
        return Err(Error::Precondition(format!(
            "radar `{}` has no antenna spacing",
            radar.id
        )));
    }
    let q = det.offset_bins;
    if q == 0 || q >= cfg.num_chirps {
        return Err(Error::Precondition(format!("comb offset {q} is not a tag residue")));
    }

    let lines: Vec<Vec<Complex<T>>> = signals
        .iter()
        .map(|s| if_spectrum(s, cfg).map(|sp| sp.grid_values(q)))
        .collect::<Result<_>>()?;
    let peak = lines[0]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().partial_cmp(&b.1.norm_sqr()).unwrap())
        .map(|(i, _)| i)
        .ok_or(Error::NoSignal)?;
    if lines[0][peak].norm_sqr() == T::zero() {
        return Err(Error::NoSignal);
    }

    let raw: Vec<f64> = lines.iter().map(|l| l[peak].arg().as_f64()).collect();
    let mut phases = vec![raw[0]];
    for w in raw.windows(2) {
        let last = *phases.last().unwrap();
        phases.push(last + wrap(w[1] - w[0]));
    }
    let m = phases.len() as f64;
    let xm = (m - 1.0) / 2.0;
    let ym = phases.iter().sum::<f64>() / m;
    let (num, den) = phases.iter().enumerate().fold((0.0, 0.0), |(n, d), (i, p)| {
        let dx = i as f64 - xm;
        (n + dx * (p - ym), d + dx * dx)
    });
    let slope = num / den;

    let lambda = cfg.wavelength_m();
    let sin = -lambda * slope / (2.0 * PI * radar.antenna_spacing_m);
    if !(sin.abs() <= 1.0) {
        return Err(Error::Estimation(format!(
            "phase slope {slope:.4} rad/element implies |sin(angle)| = {:.3}",
            sin.abs()
        )));
    }
    Ok(AoaEstimate {
        angle_rad: sin.asin(),
        ambiguous: radar.antenna_spacing_m > lambda / 2.0 * (1.0 + 1e-12),
    })
}

/// Planar position relative to the radar from range and broadside angle:
/// `x` along broadside, `y` along the array axis.
pub fn aoa_localize(range_m: f64, angle_rad: f64) -> [f64; 2] {
    [range_m * angle_rad.cos(), range_m * angle_rad.sin()]
}
