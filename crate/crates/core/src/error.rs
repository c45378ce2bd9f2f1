use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("duplicate job id `{0}`")]
    DuplicateJob(String),

    #[error("selection has {got} bits but the window holds {expected} jobs")]
    LengthMismatch { expected: usize, got: usize },

    #[error("objective vectors have different arity ({0} vs {1})")]
    ArityMismatch(usize, usize),

    #[error("window of {0} jobs is too large for exhaustive enumeration (limit {1})")]
    WindowTooLarge(usize, usize),

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid workload: {0}")]
    InvalidWorkload(String),

    #[error("synthesis: {0}")]
    Synthesis(String),

    #[error("config: field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, field: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
