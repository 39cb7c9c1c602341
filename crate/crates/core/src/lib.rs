//! Simulation and signal processing for HD-FMCW backscatter tag
//! localization.
//!
//! The crate is organised as a pipeline:
//!
//! * [`waveform`] builds chirps and periodic interrogation symbols,
//! * [`scene`] and [`channel`] describe the world and synthesize the IF a
//!   radar observes,
//! * [`localizer`] turns one IF capture into per-tag ranges,
//! * [`tracker`] follows mobile tags through time,
//! * [`geometry`] fuses ranges (and array phases) into positions.
//!
//! Signal-processing code is generic over the sample scalar (`f32` or
//! `f64`); the aliases below fix it to `f64` for typical use.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod fft;
pub mod geometry;
pub mod localizer;
pub mod scalar;
pub mod scene;
pub mod tracker;
pub mod waveform;

pub use error::{Error, Result};
pub use scalar::Real;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type IqSignal64 = waveform::IqSignal<f64>;
pub type IqSignal32 = waveform::IqSignal<f32>;
pub type Spectrum64 = localizer::Spectrum<f64>;
pub type Spectrum32 = localizer::Spectrum<f32>;
pub type Localizer64 = localizer::Localizer<f64>;
pub type Localizer32 = localizer::Localizer<f32>;
