use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input domain: {0}")]
    InputDomain(String),

    #[error("unsupported dimension d={d}: {hint}")]
    UnsupportedDimension { d: usize, hint: &'static str },

    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("value file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::InputDomain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
