use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("constant series: observed min equals observed max ({0})")]
    ConstantSeries(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("phase misaligned: {0}")]
    PhaseMisaligned(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("model not fitted")]
    NotFitted,

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }
}
