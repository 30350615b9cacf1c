use thiserror::Error;

#[derive(Debug, Error)]
pub enum LevelflowError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("numerical failure: {message}")]
    NumericalFailure { message: String, diagnostics: Vec<String> },

    #[error("unsupported matrix size {dim} (limit {limit})")]
    UnsupportedSize { dim: usize, limit: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("bracket ({lo}, {hi}) does not contain an interior minimum")]
    Bracket { lo: f64, hi: f64 },

    #[error("exceptional point search did not converge after {iterations} iterations")]
    SearchFailure { iterations: usize, trace: Vec<(f64, f64, f64)> },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("model file error at `{path}`: {message}")]
    ModelParse { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LevelflowError {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        LevelflowError::ModelParse { path: path.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, LevelflowError>;
