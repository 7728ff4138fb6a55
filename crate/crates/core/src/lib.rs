//! Chest compression rate and depth from skeletal motion capture.
//!
//! Upper-limb joint positions are reduced to distances from the floor plane,
//! and a sinusoid is fitted to each sliding window of that signal with
//! Differential Evolution. The fitted angular frequency gives the compression
//! rate, the amplitude the compression depth.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the file formats and the sweep use.

// `!(x > 0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod de;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod scalar;
pub mod sinusoid;
pub mod stream;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{JointType, MIN_FIT_SAMPLES};
pub use scalar::Scalar;

pub type Vec3 = geometry::Vec3<f64>;
pub type FloorPlane = geometry::FloorPlane<f64>;
pub type JointFrame = geometry::JointFrame<f64>;
pub type Sample = geometry::Sample<f64>;
pub type Window = geometry::Window<f64>;
pub type SineParams = sinusoid::SineParams<f64>;
pub type ParamBounds = sinusoid::ParamBounds<f64>;
pub type FitResult = sinusoid::FitResult<f64>;
pub type DeConfig = de::DeConfig<f64>;
pub type StreamConfig = stream::StreamConfig<f64>;
pub type CompressionEvent = evaluation::CompressionEvent<f64>;
pub type Prediction = evaluation::Prediction<f64>;

pub type SineParams32 = sinusoid::SineParams<f32>;
pub type FitResult32 = sinusoid::FitResult<f32>;
pub type DeConfig32 = de::DeConfig<f32>;
pub type StreamConfig32 = stream::StreamConfig<f32>;
