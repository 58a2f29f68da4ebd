use thiserror::Error;

/// Errors raised by the numerical kernels, densities, samplers and fitters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid matrix data: {0}")]
    InvalidData(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (smallest eigenvalue {0:.3e})")]
    NotSpd(f64),
    #[error("matrix is rank deficient (smallest/largest singular value {0:.3e})")]
    RankDeficient(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("kernel is singular at u = 0 (q < 1)")]
    SingularKernel,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("degenerate eigenvalues: {0}")]
    DegenerateEigenvalues(String),
    #[error("argument outside the support: {0}")]
    OutsideSupport(String),
    #[error("congruence matrix C is singular")]
    SingularCongruence,
    #[error("evidence grades need a nonnegative BIC* difference, got {0}")]
    NegativeDiff(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
