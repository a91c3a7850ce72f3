use thiserror::Error;

/// Everything that can stop a run before a report is produced.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {0}")]
    FileNotFound(String),

    /// Malformed TOML. Line and column are 1-based.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: calogero::error::Error,
    },

    #[error("unknown demo `{0}` (available: {1})")]
    UnknownDemo(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn numerical(context: impl Into<String>) -> impl FnOnce(calogero::error::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Numerical { context, source }
    }
}
