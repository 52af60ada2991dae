use thiserror::Error;

pub type Result<T> = std::result::Result<T, DwdError>;

#[derive(Debug, Error)]
pub enum DwdError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A factorization or scalar solve failed on data that should have been
    /// well posed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An iterative solver divided by a vanishing inner product or ran out of
    /// iterations.
    #[error("iterative solver breakdown: {0}")]
    Breakdown(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DwdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DwdError::InvalidInput(msg.into())
    }
}
