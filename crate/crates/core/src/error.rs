use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("unit {0} not found in records")]
    UnitNotFound(u32),
    #[error("dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },
    #[error("wrong model kind: expected {expected}, found {found}")]
    WrongModelKind { expected: String, found: String },
    #[error("{d} features exceed the exact Shapley limit of {max}; select a smaller feature set first")]
    TooManyFeatures { d: usize, max: usize },
    #[error("singular weighted design: {0}")]
    SingularDesign(String),
    #[error("constant feature `{0}` has no quantile bins")]
    ConstantFeature(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's input rather than by a
    /// numerical failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Divergence { .. } | Error::SingularDesign(_)
        )
    }
}
