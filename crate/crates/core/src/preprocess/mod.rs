//! Bandpass filtering, 30-second windowing and signal-quality screening.

mod filter;
mod sqi;
mod window;

pub use filter::{design_bandpass, zero_phase_filter, Biquad, FilterDesign};
pub use sqi::{
    compute_sqi, screen_windows, sqi_from_beats, RejectReason, ScreeningSummary, SqiConfig,
    SqiResult, Verdict,
};
pub use window::{segment_windows, Window};
