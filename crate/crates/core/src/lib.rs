//! Audio classification networks, layer-wise relevance propagation and
//! perturbation-based validation of the resulting explanations.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`] and [`nn`]: a small dense-tensor network engine with the
//!   layer kinds needed for the raw-waveform network and the AlexNet-style
//!   spectrogram network, plus SGD training and checkpoints.
//! - [`audio`]: WAV decoding, 48→8 kHz resampling, random zero-padding,
//!   STFT spectrograms, decibel conversion, cropping and mean removal.
//! - [`lrp`]: relevance propagation over a recorded forward trace.
//! - [`eval`]: sample-zeroing sweeps, frequency-axis scaling and accuracy
//!   bookkeeping.
//! - [`dataset`]: AudioMNIST scanning, speaker-disjoint folds and a
//!   synthetic generator for desk-scale experiments.

pub mod audio;
pub mod blob;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod lrp;
pub mod nn;
pub mod seed;
pub mod tensor;

pub use error::{Error, ErrorClass, Result};
pub use tensor::{Real, Tensor};
