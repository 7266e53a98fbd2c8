use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("cannot decode image {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: expected {}x{}, found {}x{}", expected.0, expected.1, found.0, found.1)]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config {context}: {message}")]
    Config { context: String, message: String },

    #[error("invalid landmarks: {0}")]
    InvalidLandmarks(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("k = {k} exceeds the number of distinct points ({distinct})")]
    TooFewDistinct { k: usize, distinct: usize },

    #[error("region has {found} pixels, at least {required} required")]
    TooFewPixels { found: usize, required: usize },

    #[error("no pixels selected")]
    EmptySelection,

    #[error("no veins detected")]
    NoVeinsDetected,

    #[error("degenerate landmarks: {0}")]
    DegenerateLandmarks(String),

    #[error("iris region is empty")]
    EmptyIrisRegion,

    #[error("scale {0:?} has no subclasses")]
    MissingSubclasses(String),

    #[error("zero vector in cosine similarity")]
    ZeroVector,

    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

impl Error {
    /// True for errors caused by bad user input (files, flags, config), as
    /// opposed to a pipeline that ran on valid input and could not produce an
    /// answer.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MissingFile(_)
                | Error::Decode { .. }
                | Error::Io { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidParameter(_)
                | Error::Config { .. }
                | Error::InvalidLandmarks(_)
                | Error::UnknownLabel(_)
        )
    }

    pub(crate) fn config(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Config {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
