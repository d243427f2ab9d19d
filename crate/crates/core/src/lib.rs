//! PPG-based stroke triage pipeline: zero-phase bandpass filtering, 30-second
//! windowing, signal-quality screening, fiducial detection, morphology and
//! beat-rate-variability features, and a repeated stratified-split logistic
//! regression evaluation with recursive feature elimination.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod fiducials;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
