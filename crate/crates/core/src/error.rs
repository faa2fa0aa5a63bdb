use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("operation requires a convex domain, got {0}")]
    UnsupportedDomain(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point {point:?} is not a member of the {domain} domain")]
    NotAMember { domain: &'static str, point: Vec<f64> },

    #[error("non-finite objective value at x = {x:?}, y = {y:?}")]
    NonFinite { x: Vec<f64>, y: Vec<f64> },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("grid duality gap {gap:e} exceeds tolerance {tol:e}")]
    GapTooLarge { gap: f64, tol: f64 },

    #[error("degenerate quadratic game: {0}")]
    Degenerate(String),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
