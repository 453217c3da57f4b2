use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite (non-positive pivot at index {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("singular Lyapunov operator: {0}")]
    SingularLyapunov(String),

    #[error("negative duration {0} passed to {1}")]
    NegativeTime(f64, &'static str),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("nonlinear flow denominator {0} is not positive; input kernel is not PSD")]
    NotPsd(f64),

    #[error("finite escape in closed-form Riccati solution at t = {0}")]
    FiniteEscape(f64),

    #[error("reference integrator blew up at step {step}: norm {norm:.3e} exceeds {limit:.3e}")]
    BlowUp { step: usize, norm: f64, limit: f64 },

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("eigensolver did not converge")]
    NoConvergence,
}

pub(crate) fn dim_mismatch(op: &'static str, expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        op,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
