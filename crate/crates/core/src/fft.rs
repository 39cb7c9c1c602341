//! Cached FFT plans with the unitary (1/sqrt(n)) normalization used for all
//! spectra in this crate.

use std::sync::{Arc, Mutex};

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

pub struct FftEngine<T: Real> {
    planner: Mutex<FftPlanner<T>>,
}

impl<T: Real> Default for FftEngine<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> FftEngine<T> {
    pub fn new() -> Self {
        Self {
            planner: Mutex::new(FftPlanner::new()),
        }
    }

    pub fn forward(&self, len: usize) -> Arc<dyn Fft<T>> {
        self.planner.lock().unwrap().plan_fft_forward(len)
    }

    pub fn inverse(&self, len: usize) -> Arc<dyn Fft<T>> {
        self.planner.lock().unwrap().plan_fft_inverse(len)
    }

    /// In-place forward DFT scaled by 1/sqrt(n).
    pub fn forward_unitary(&self, buf: &mut [Complex<T>]) {
        self.forward(buf.len()).process(buf);
        scale(buf);
    }

    /// In-place inverse DFT scaled by 1/sqrt(n).
    pub fn inverse_unitary(&self, buf: &mut [Complex<T>]) {
        self.inverse(buf.len()).process(buf);
        scale(buf);
    }
}

fn scale<T: Real>(buf: &mut [Complex<T>]) {
    let s = T::one() / T::from_usize(buf.len()).unwrap().sqrt();
    for v in buf.iter_mut() {
        *v = *v * s;
    }
}
