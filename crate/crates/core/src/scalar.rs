//! Scalar abstraction shared by the signal-processing code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::FftNum;

/// Floating point sample type: `f32` or `f64`.
///
/// Physical parameters (frequencies, positions, durations) stay in `f64`
/// everywhere; only sample buffers, spectra and solver state are generic.
pub trait Real:
    Float + FloatConst + FromPrimitive + FftNum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + FftNum + Default + Debug + Display + Send + Sync + 'static
{
}
