use thiserror::Error;

/// Errors raised by the grain model, detector, codec and harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A probability or rate outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two sequences or images whose sizes must agree do not.
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// Image dimensions the operation cannot handle.
    #[error("invalid dimensions {rows}x{cols}: {reason}")]
    Dimensions {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    /// A grain image with an incomplete or overlapping grain.
    #[error("invalid grain image at ({row}, {col}): {reason}")]
    InvalidImage {
        row: usize,
        col: usize,
        reason: String,
    },

    /// Grain placement could not reach its target counts within the retry budget.
    #[error("grain generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    /// The written image admits no tiling under the trellis model.
    #[error(
        "written image is inconsistent with the grain model (pass at row {row}, column {col})"
    )]
    InconsistentImage { row: usize, col: usize },

    /// Brute-force enumeration would exceed its configuration budget.
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),

    /// Malformed text input (images, config files).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
