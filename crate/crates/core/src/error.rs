use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("all importance weights vanished at beta = {beta}")]
    DegenerateWeights { beta: f64 },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("temperature ladder exceeded {0} rungs without reaching beta = 1")]
    LadderTooLong(usize),
    #[error("quadrature did not converge below {tol} by resolution {resolution}")]
    QuadratureNotConverged { tol: f64, resolution: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
