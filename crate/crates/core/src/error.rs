use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("channel shapes differ: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not Hermitian (max |A - A^†| = {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("not an isometry: {0}")]
    NotIsometry(String),

    #[error("epsilon must lie in [0, 1), got {0}")]
    BadEpsilon(f64),

    #[error("alpha out of range: {0}")]
    BadAlpha(String),

    #[error("invalid dimensions: {0}")]
    BadDims(String),

    #[error("invalid object: {0}")]
    Invalid(String),

    #[error("empty input list")]
    EmptyList,

    #[error("vector is not rational with denominator <= {0}")]
    NotRational(u64),

    #[error("zero numerator at index {0}")]
    ZeroDenominator(usize),

    #[error("channels are not orthogonal (Tr[J_j J_k] = {0:e})")]
    NotOrthogonal(f64),

    #[error("Choi matrix {0} is not full rank")]
    NotFullSupport(&'static str),

    #[error("bad configuration: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
