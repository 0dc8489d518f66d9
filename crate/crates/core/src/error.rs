use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not positive semi-definite: {0}")]
    NotPsd(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("constraint violation: {0}")]
    Constraint(String),
    #[error("missing data: {0}")]
    Missing(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
    /// EM stopped on an error; `trace` holds the iterations completed so far.
    #[error("EM aborted after {} iterations: {source}", trace.iterations)]
    Em {
        source: Box<Error>,
        trace: Box<crate::em::EmTrace>,
    },
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Em { source, .. } => source.is_numerical(),
            e => matches!(
                e,
                Error::NotPsd(_) | Error::Singular(_) | Error::NonFinite(_) | Error::Constraint(_)
            ),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
