use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("eigendecomposition did not converge")]
    NoConvergence,
    #[error("eigenvalue {0:.3e} is below the PSD clamp threshold")]
    NegativeEigenvalue(f64),
    #[error("matrix is singular or not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is rank deficient")]
    RankDeficient,
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
