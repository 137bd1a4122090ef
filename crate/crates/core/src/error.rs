use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid response data: {0}")]
    InvalidData(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no item-item comparisons could be formed")]
    NoComparisons,

    #[error("comparison graph is disconnected ({} components)", components.len())]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("maximum likelihood estimate does not exist: |theta|_inf exceeded {bound} after {iterations} iterations")]
    Diverged { bound: f64, iterations: usize },

    #[error("split {index} failed: {source}")]
    SplitFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::UnknownName { .. } => "unknown_name",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidData(_) => "invalid_data",
            Error::Parse { .. } => "parse",
            Error::NoComparisons => "no_comparisons",
            Error::Disconnected { .. } => "disconnected",
            Error::Diverged { .. } => "diverged",
            Error::SplitFailed { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// True for errors caused by how a command was invoked rather than by the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_) | Error::UnknownName { .. } | Error::LengthMismatch { .. })
    }

    /// Component partition carried by a connectivity failure, if any.
    pub fn components(&self) -> Option<&[Vec<usize>]> {
        match self {
            Error::Disconnected { components } => Some(components),
            Error::SplitFailed { source, .. } => source.components(),
            _ => None,
        }
    }
}
