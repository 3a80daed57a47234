use thiserror::Error;

/// Every failure the benchmark can report.
///
/// Variants are grouped by how a caller is expected to react: shape, usage and
/// configuration errors are programming or setup mistakes, data/plan/checkpoint
/// errors come from invalid inputs on disk.
#[derive(Debug, Error)]
pub enum GilError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value produced by `{0}`")]
    NonFinite(&'static str),

    #[error("vocabulary error: index {index} out of range for vocabulary of size {size}")]
    Vocabulary { index: usize, size: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("plan error: {0}")]
    Plan(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GilError {
    /// True for errors caused by bad input files or plans rather than misuse.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            GilError::Data(_)
                | GilError::Plan(_)
                | GilError::Parse { .. }
                | GilError::Checkpoint(_)
                | GilError::Vocabulary { .. }
                | GilError::Eval(_)
                | GilError::Report(_)
                | GilError::Json(_)
                | GilError::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, GilError>;
