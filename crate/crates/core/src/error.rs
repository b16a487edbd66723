use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("factorization of {dim}x{dim} system failed after ridge")]
    SingularSystem { dim: usize },

    #[error("synthetic generation failed to reach full column rank after {attempts} attempts")]
    GenerationFailure { attempts: usize },

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("test sample {0} is missing from every view")]
    AllViewsMissing(usize),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. } | Error::NonFiniteObjective { .. } | Error::GenerationFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
