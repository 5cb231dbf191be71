//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across design, simulation, and verification.
#[derive(Debug, Error)]
pub enum Error {
    /// Spectral radius is not strictly inside the unit circle.
    #[error("matrix is not stable: spectral radius {rho} is not below 1 - 1e-9")]
    NotStable { rho: f64 },

    /// A symmetric positive-definite factorization failed.
    #[error("matrix is not symmetric positive definite: {context}")]
    NotPositiveDefinite { context: &'static str },

    /// A linear solve or inversion hit a (numerically) singular matrix.
    #[error("singular matrix: {context}")]
    SingularMatrix { context: &'static str },

    /// An entry magnitude crossed the 1e150 growth guard.
    #[error("matrix entries overflowed the 1e150 guard: {context}")]
    Overflow { context: String },

    /// An iteration stopped before reaching its required residual.
    #[error("iteration failed to converge: {context} (residual {residual:.3e})")]
    ConvergenceFailure {
        context: &'static str,
        residual: f64,
    },

    /// Dynamics matrix has an eigenvalue too close to the unit circle.
    #[error("eigenvalue magnitude {magnitude} is within 1e-9 of the unit circle")]
    UnitCircleEigenvalue { magnitude: f64 },

    /// Dynamics matrix is numerically singular.
    #[error("dynamics matrix is singular: eigenvalue magnitude {magnitude} below 1e-9")]
    SingularA { magnitude: f64 },

    /// Unstable/stable states are interleaved or the blocks are coupled.
    #[error("dynamics matrix is not in unstable-first block form: {context}")]
    NotBlockOrdered { context: String },

    /// An index does not name a zero diagonal entry.
    #[error("index {index} does not name a zero diagonal entry")]
    BadIndex { index: usize },

    /// Matrix or vector dimensions do not line up.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// A packet's reference time cannot be reconciled with decoder state.
    #[error("decoder reference time {provided} disagrees with decoder history (last reception {internal})")]
    Desync { provided: i64, internal: i64 },

    /// A covariance update left the positive-semidefinite cone by more than
    /// the breakdown threshold.
    #[error("covariance eigenvalue {eigenvalue:.3e} below breakdown threshold at step {step}")]
    NumericalBreakdown { step: i64, eigenvalue: f64 },

    /// A trajectory is too short for the requested diagnostic.
    #[error("trajectory too short: need at least {needed} steps past the anchor, got {got}")]
    TooShort { needed: usize, got: usize },

    /// Channel probabilities are malformed.
    #[error("invalid channel probabilities: {0}")]
    BadProbabilities(String),

    /// No simulated trial contained a critical event.
    #[error("no trial recorded a critical event; secrecy conditions were not exercised")]
    NoCriticalTrials,

    /// Scenario file failed to parse or validate.
    #[error("invalid scenario: {0}")]
    BadScenario(String),

    /// Caller-supplied argument outside the documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of numerical routines (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. }
                | Error::Overflow { .. }
                | Error::ConvergenceFailure { .. }
                | Error::NumericalBreakdown { .. }
        )
    }
}
