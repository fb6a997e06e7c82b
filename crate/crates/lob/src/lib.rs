//! Training, evaluation, and analysis harness around `lob-core`:
//! checkpoint and log file formats, the epoch/cycle training loop,
//! deterministic SVG reports, and the command line.

pub mod cli;
pub mod formats;
pub mod plots;
pub mod trainer;

/// Everything that can go wrong on the harness side. Core errors pass
/// through; file-format errors carry the section that failed.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lob_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{context}: {source}")]
    Json {
        context: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn json(context: impl Into<String>) -> impl FnOnce(serde_json::Error) -> Error {
        let context = context.into();
        move |source| Error::Json { context, source }
    }

    /// Process exit code: 2 for configuration problems, 3 for numeric
    /// aborts, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Core(lob_core::Error::Config(_)) | Error::Json { .. } => 2,
            Error::Core(lob_core::Error::NonFinite(_)) => 3,
            _ => 1,
        }
    }
}
