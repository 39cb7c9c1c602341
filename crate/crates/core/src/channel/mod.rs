//! IF signal synthesis for a scene: a fast analytic path and a full RF
//! mixing oracle used to cross-check it.

mod dump;
mod fast;
mod noise;
mod oracle;

pub use dump::{read_if_dump, write_if_dump, IfDumpMeta};
pub use fast::{simulate_if_fast, simulate_if_fast_array};
pub use noise::{add_noise, add_noise_power, noise_rng};
pub use oracle::{simulate_rf_oracle, simulate_rf_oracle_with, OracleOptions};

use crate::error::{Error, Result};
use crate::waveform::RadarConfig;

/// Fundamental Fourier coefficient of a +/-1 square wave for each of the
/// `exp(+j 2 pi f_m t)` and `exp(-j 2 pi f_m t)` components.
pub const SQUARE_WAVE_FUNDAMENTAL: f64 = 2.0 / std::f64::consts::PI;

pub(crate) fn check_range_frequency(label: &str, fr_hz: f64, cfg: &RadarConfig) -> Result<()> {
    let limit = cfg.sample_rate_hz / 2.0;
    if fr_hz >= limit {
        return Err(Error::AmbiguousRange {
            reflector: label.to_string(),
            fr_hz,
            limit_hz: limit,
        });
    }
    Ok(())
}
