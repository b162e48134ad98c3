use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("geodesic between antipodal points is not unique")]
    AntipodalAmbiguity,

    #[error("discretization is only implemented for n = 2, got n = {0}")]
    UnsupportedDimension(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sinkhorn did not converge in {iterations} iterations at reg {reg:e} (marginal violation {violation:e})")]
    NotConverged {
        iterations: usize,
        reg: f64,
        violation: f64,
    },

    #[error("degenerate barycenter for source point {0}")]
    DegenerateBarycenter(usize),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
