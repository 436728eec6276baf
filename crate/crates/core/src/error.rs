use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signal length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("matrix size {rows}x{cols} overflows")]
    SizeOverflow { rows: usize, cols: usize },

    #[error("iteration did not converge after {iterations} steps (best estimate sigma_min={sigma_min}, sigma_max={sigma_max})")]
    NonConvergence {
        iterations: usize,
        sigma_min: f64,
        sigma_max: f64,
    },

    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("signal has zero norm")]
    ZeroSignal,

    #[error("bound is not finite: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;
