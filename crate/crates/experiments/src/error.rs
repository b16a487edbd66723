use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("schema violation in {place}: {detail}")]
    SchemaViolation { place: String, detail: String },

    #[error("non-finite entry in {place} at row {row}, column {col}")]
    NonFiniteEntry { place: String, row: usize, col: usize },

    #[error("label {value} in {place} at row {row}, column {col} is not in {{-1, 0, 1}}")]
    LabelDomainViolation { place: String, row: usize, col: usize, value: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] mvml_core::Error),

    #[error("repeat {index} failed: {source}")]
    Repeat { index: usize, source: mvml_core::Error },
}

impl ExpError {
    pub(crate) fn schema(place: impl Into<String>, detail: impl Into<String>) -> Self {
        ExpError::SchemaViolation { place: place.into(), detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExpError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExpError::Core(e) | ExpError::Repeat { source: e, .. } if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExpError>;
