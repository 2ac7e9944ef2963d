use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("matrix is not positive definite (min eigenvalue {min}, max eigenvalue {max})")]
    NotPositiveDefinite { min: f64, max: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("no positive documents available")]
    NoPositives,
    #[error("no negative documents available")]
    NoNegatives,
    #[error("index {index} out of range")]
    InvalidIndex { index: usize },
    #[error("invalid triple sample: {0}")]
    InvalidSample(String),
    #[error("cannot compute a metric over an empty ranking")]
    EmptyRanking,
    #[error("empty input")]
    EmptyInput,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model format error: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Variant name, for diagnostics that should be stable across message wording.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::EmptyCandidateSet => "EmptyCandidateSet",
            Error::NoPositives => "NoPositives",
            Error::NoNegatives => "NoNegatives",
            Error::InvalidIndex { .. } => "InvalidIndex",
            Error::InvalidSample(_) => "InvalidSample",
            Error::EmptyRanking => "EmptyRanking",
            Error::EmptyInput => "EmptyInput",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse { .. } => "ParseError",
            Error::ModelFormat(_) => "ModelFormat",
            Error::Io(_) => "Io",
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn dim(expected: usize, actual: usize) -> Self {
        Error::DimMismatch { expected, actual }
    }
}
