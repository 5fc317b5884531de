//! Long-term single-target tracking.
//!
//! A multi-layer kernelized correlation filter estimates translation, a
//! separate one-dimensional search over a scale pyramid estimates size, and
//! an incremental SVM proposes candidate windows when the translation
//! response collapses. A Gaussian-mixture PHD filter picks among those
//! candidates.
//!
//! [`tracker::run_sequence`] is the entry point for whole sequences;
//! [`tracker::Tracker`] steps one frame at a time.
pub mod bbox;
pub mod config;
pub mod correlation;
pub mod error;
pub mod eval;
pub mod features;
pub mod fft;
pub mod gmphd;
pub mod image;
pub mod redetect;
pub mod results;
pub mod scale;
pub mod sequence;
pub mod tracker;

pub use error::{Error, Result};
