use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("validation error: {0}")]
    Invalid(String),
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("{0} has zero variance")]
    ZeroVariance(&'static str),
    #[error("{0} cannot be normalized (non-positive sum)")]
    Normalization(&'static str),
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures, as opposed to bad input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ZeroVariance(_) | Error::Normalization(_) | Error::NonFinite { .. }
        )
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            column,
            message: message.into(),
        }
    }
}
