//! Detection and decoding for two-dimensional magnetic recording on the
//! four-rectangular-grain discrete grain model.
//!
//! The crate is organised along the signal path:
//!
//! - [`grain`]: grain types, random grain images and the overwrite rule that
//!   turns coded bits into a written image.
//! - [`trellis`]: the 39-state two-row trellis, its feedback-weighted
//!   transition table and the channel output tables.
//! - [`detector`]: the row-pair forward-backward detector with soft grain-state
//!   feedback between passes.
//! - [`sccc`]: the rate-1/4 serially concatenated convolutional code with
//!   random puncturing/repetition and iterative MAP decoding.
//! - [`harness`]: block simulation, rate search, configuration and reports.
//! - [`oracle`]: brute-force references used to check the detector and the
//!   MAP decoders on toy sizes.

pub mod detector;
pub mod error;
pub mod grain;
pub mod harness;
pub mod oracle;
pub mod sccc;
pub mod trellis;

pub use error::{Error, Result};

/// Magnitude at which every LLR in the system is clipped.
pub const LLR_CAP: f64 = 100.0;

/// Clip an LLR to `[-LLR_CAP, LLR_CAP]`, mapping NaN to 0.
#[inline]
pub fn clip_llr(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-LLR_CAP, LLR_CAP)
    }
}
