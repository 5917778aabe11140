//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::transfer::TransferReport;

/// Errors produced by checkpoint I/O, the linear-algebra kernels and the
/// transfer pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed tensor file: {0}")]
    Malformed(String),

    #[error("tensor `{name}`: {reason}")]
    BadTensor { name: String, reason: String },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid rank {rank}: {reason}")]
    InvalidRank { rank: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular spectrum is all zero")]
    ZeroSpectrum,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("singular value decomposition did not converge")]
    SvdFailed,

    #[error("module `{0}` not present in base model")]
    MissingModule(String),

    #[error(
        "no adapter keys could be transferred ({} keys encountered, all skipped or failed)",
        .report.aggregate.total_keys
    )]
    AllKeysSkipped { report: Box<TransferReport> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps an error with the file path it originated from.
    pub fn with_path(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
