use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LdlError>;

#[derive(Debug, Error)]
pub enum LdlError {
    /// An architecture, experiment or dataset description is not usable.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("index {index} out of range for {bound} classes")]
    Index { index: usize, bound: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// A documented pre-condition on inputs (e.g. rows summing to one) was violated.
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("state error: {0}")]
    State(String),

    #[error("teacher bank missing: {0}")]
    MissingBank(String),

    #[error("format error at byte {offset}: {detail}")]
    Format { offset: usize, detail: String },

    #[error("not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LdlError {
    pub(crate) fn dim(context: impl Into<String>, expected: impl ToString, actual: impl ToString) -> Self {
        LdlError::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
