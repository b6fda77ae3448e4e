use thiserror::Error;

/// Errors surfaced by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("lambert argument {0} is below -1/e")]
    Branch(f64),
    #[error("integer overflow: {0}")]
    Overflow(String),
    #[error("dense storage needs {needed} coefficients, budget is {budget}")]
    MemoryBudget { needed: u128, budget: u128 },
    #[error("degree {degree} exceeds the supported maximum {max}")]
    UnsupportedDegree { degree: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("exclusion vectors are numerically dependent (gram determinant {0:e})")]
    RankDeficient(f64),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("eigenvalue {value} lies outside [{lo}, {hi}] beyond the clamping buffer")]
    SpectrumOverflow { value: f64, lo: f64, hi: f64 },
    #[error("size cap exceeded: {0}")]
    Cap(String),
    #[error("ill-conditioned system (condition number {0:e})")]
    IllConditioned(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
