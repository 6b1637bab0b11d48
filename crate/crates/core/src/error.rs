use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("inconsistent state: {0}")]
    InconsistentState(String),

    #[error("singular parameters: {0}")]
    SingularParameters(String),

    #[error("limit-cycle conditions violated: {0}")]
    ConditionsViolated(String),

    #[error("simulation diverged at t = {t:.6} s: {reason}")]
    Diverged { t: f64, reason: String },

    #[error("estimation failed: {reason}")]
    EstimationFailed { reason: String, diagnostics: Vec<String> },

    #[error("rank-deficient regression: {0}")]
    RankDeficient(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
