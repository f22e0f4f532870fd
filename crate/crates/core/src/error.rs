use thiserror::Error;

/// Errors shared across the analytical and simulation modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("integration interval is empty or inverted (lo >= hi)")]
    InvalidInterval,

    #[error("no sign change over the bracket: f(lo) and f(hi) have the same sign")]
    NoBracket,

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("distance must be strictly positive, got {0} km")]
    NonPositiveDistance(f64),

    #[error("Laplace-transform argument must be strictly positive, got {0}")]
    NonPositiveLaplaceArg(f64),

    #[error("path loss exponent must exceed 2 for interference integrals to converge, got {0}")]
    ExponentTooSmall(f64),

    #[error("invalid path loss model: {0}")]
    InvalidModel(String),

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    #[error("calibration grid is empty or mismatched with the oracle values")]
    EmptyGrid,

    #[error("simulation window is degenerate: {0}")]
    DegenerateWindow(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
