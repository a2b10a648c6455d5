use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate marginal{}: all samples identical", fmt_column(.column))]
    DegenerateMarginal { column: Option<usize> },

    #[error("insufficient data: got {got} rows, need at least {needed}")]
    InsufficientData { got: usize, needed: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error("unsupported model format version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_column(column: &Option<usize>) -> String {
    match column {
        Some(c) => format!(" in column {c}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
