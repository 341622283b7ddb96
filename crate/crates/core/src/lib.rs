//! Gait authentication from smartphone inertial recordings.
//!
//! The pipeline resamples and filters raw accelerometer/gyroscope streams,
//! segments walking cycles with an adaptive magnitude template, expresses
//! every cycle in an orientation-invariant frame, feeds the normalized
//! cycles to a small convolutional network used as a feature extractor, and
//! authenticates a target user with a one-class SVM whose per-cycle scores
//! are accumulated by a sequential probability ratio test.

// `!(x > 0.0)` is used on purpose so NaN fails the check; numeric kernels index freely.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cnn;
pub mod commands;
pub mod config;
pub mod container;
pub mod cycles;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod normalize;
pub mod orientation;
pub mod osvm;
pub mod pca;
pub mod pipeline;
pub mod profile;
pub mod recording;
pub mod signal;
pub mod spline;
pub mod sprt;
pub mod synth;

pub use error::{GaitError, Result};
pub use recording::{parse_recording, write_recording, Recording, Sample, Sensor};
pub use signal::{lowpass_fir, resample_recording, resample_uniform, welch_psd, Spectrum, UniformSignal};
