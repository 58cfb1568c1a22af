use thiserror::Error;

/// Errors produced by synthesis, lowering and verification.
#[derive(Debug, Error)]
pub enum SynthError {
    #[error("zero vector has no reflection")]
    ZeroVector,

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not unitary: max |M^dag M - I| = {residual:.3e}")]
    NotUnitary { residual: f64 },

    #[error("matrix is not Hermitian: max |M - M^dag| = {residual:.3e}")]
    NotHermitian { residual: f64 },

    #[error("matrix is not normal: max |M M^dag - M^dag M| = {residual:.3e}")]
    NotNormal { residual: f64 },

    #[error("columns are not orthonormal: max |A^dag A - I| = {residual:.3e}")]
    NotIsometry { residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size {size} exceeds the configured cap {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("invalid control word: {0}")]
    InvalidWord(String),

    #[error("invalid club term: {0}")]
    InvalidTerm(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("diagonal entry {index} drifted off the unit circle (|z| = {modulus})")]
    PhaseDrift { index: usize, modulus: f64 },

    #[error("integer overflow while evaluating {0}")]
    Overflow(&'static str),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;
