use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} exceeds cap: {size} > {cap}")]
    CapExceeded { what: &'static str, size: usize, cap: usize },

    #[error("inadmissible flip at site {site}: {reason}")]
    InadmissibleFlip { site: usize, reason: &'static str },

    #[error("no convergence: {0}")]
    Convergence(String),

    /// An internal consistency check failed (broken invariant, cancellation).
    #[error("numerical defect: {0}")]
    Numerical(String),

    #[error("hypothesis ({hypothesis}) violated at n = {index}")]
    Hypothesis { hypothesis: &'static str, index: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
