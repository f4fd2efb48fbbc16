//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, estimation, and diagnostics.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// An operation was asked of a variant that does not support it.
    #[error("operation not implemented for {what}")]
    NotImplemented { what: String },

    /// Vector/matrix dimensions do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A quantity that must be finite is infinite (or undefined) here.
    #[error("{what} is not finite for this model")]
    NotFinite { what: &'static str },

    /// Exact enumeration would exceed the configured support budget.
    #[error("joint support size {size:.3e} exceeds the enumeration limit {limit:.1e}")]
    SupportOverflow { size: f64, limit: f64 },

    /// Exact enumeration is only defined for finitely supported inputs.
    #[error("exact enumeration unsupported: {reason}")]
    EnumerationUnsupported { reason: String },

    /// Not enough data points for the requested statistic.
    #[error("insufficient data for {what}: need {needed}, have {have}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        have: usize,
    },

    /// The equal-mean precondition of an order test does not hold.
    #[error("mean mismatch: {mean_a} vs {mean_b} differs by more than {limit} ({context})")]
    MeanMismatch {
        mean_a: f64,
        mean_b: f64,
        limit: f64,
        context: &'static str,
    },

    /// A proposal places zero mass where the target has mass.
    #[error("absolute continuity violated: proposal density is zero at a point with positive target mass ({context})")]
    AbsoluteContinuity { context: String },

    /// A matrix that must be positive (semi)definite is not.
    #[error("matrix is not positive {kind}definite: {message}")]
    NotPositiveDefinite {
        kind: &'static str,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
