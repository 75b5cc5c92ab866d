use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),

    #[error("transfer function is improper (numerator degree {num} > denominator degree {den})")]
    Improper { num: usize, den: usize },

    #[error("transfer function must be strictly proper")]
    NotStrictlyProper,

    #[error("system is not stable: {0}")]
    Unstable(String),

    #[error("degenerate interconnection: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step size mismatch: expected {expected}, got {actual}")]
    StepMismatch { expected: f64, actual: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("certificate not satisfied: {0}")]
    NotCertified(String),

    #[error("quadratic program did not converge after {iterations} iterations (kkt residual {kkt_residual:e})")]
    QpNotConverged { iterations: usize, kkt_residual: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("numerical routine did not converge: {0}")]
    NotConverged(String),

    #[error("simulation diverged at t = {0} s")]
    Diverged(f64),

    #[error("plant failed to settle inside the start ball (distance {distance:.4} m after {elapsed:.1} s)")]
    SettleTimeout { distance: f64, elapsed: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
