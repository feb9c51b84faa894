//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by signal conditioning, detection, model building,
/// training, and file handling.
#[derive(Debug, Error)]
pub enum Error {
    /// Input samples contain NaN or infinite values, or are empty.
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    /// Fewer than two samples; no interval to interpolate over.
    #[error("too short to resample")]
    TooShortToResample,

    /// Input shorter than an operation's minimum duration.
    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    /// Record shorter than the 9 second pipeline minimum.
    #[error("below challenge minimum: {0}")]
    BelowMinimumDuration(String),

    /// Tensor or parameter shapes do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Training requires at least one example.
    #[error("empty dataset")]
    EmptyDataset,

    /// Training or scoring input violates a precondition (single class,
    /// class rarer than the fold count, epoch budget, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Malformed record, label, feature, or model file.
    #[error("{0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
