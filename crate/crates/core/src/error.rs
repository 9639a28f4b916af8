use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: expected m = {expected}, got m = {found}")]
    GridMismatch { expected: usize, found: usize },

    /// The iterative solver hit its iteration cap. `residuals` holds the relative
    /// residual after every iteration.
    #[error(
        "solver did not converge after {iterations} iterations (relative residual {residual:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        residuals: Vec<f64>,
    },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("malformed field file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
