use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("class {class} is not a valid foreground class (num_classes = {num_classes})")]
    InvalidClass { class: u16, num_classes: u16 },

    #[error("invalid pairing: {0}")]
    InvalidPairing(String),

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid label map: {0}")]
    InvalidMap(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("undefined input: {0}")]
    UndefinedInput(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("no eligible region: {0}")]
    NoEligibleRegion(String),

    #[error("retry budget of {0} attempts exhausted")]
    RetriesExhausted(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unpaired input: {0}")]
    Unpaired(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// True for errors caused by the input data rather than by how the tool was invoked.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
