//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by construction and evaluation routines.
///
/// Non-convergence of a refinement study is deliberately *not* an error:
/// it is reported through [`crate::riemann::ConvergenceReport`] verdicts.
/// Only identity pipelines that cannot produce a meaningful residual at
/// all surface [`CoreError::Inconclusive`].
#[derive(Debug, Error)]
pub enum CoreError {
    /// Ensembles (or drivers, solutions) from different probability spaces
    /// were combined.
    #[error("probability space mismatch: {0}")]
    SpaceMismatch(String),

    /// An ensemble contained NaN or infinite samples where finite values
    /// are required.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A parameter was outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A point, interval or set fell outside the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A grid was inconsistent with the request (alignment, power of two,
    /// aggregation level).
    #[error("grid error: {0}")]
    Grid(String),

    /// A computation would exceed the configured desk-scale budget.
    #[error("resource budget exceeded: {0}")]
    Budget(String),

    /// A spatial grid does not cover the operational support radius.
    #[error("grid coverage insufficient: {0}")]
    Coverage(String),

    /// An identity check could not be carried out because one of its
    /// constituent pipelines failed its convergence report.
    #[error("identity inconclusive: {0}")]
    Inconclusive(String),

    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
