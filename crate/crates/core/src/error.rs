//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while loading inputs or running the
/// pipeline. I/O and decode failures carry the offending path so batch
/// callers can report which entry failed.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Filesystem-level failure (open, read, write).
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Image decode/encode failure.
    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// A manifest line that is not valid JSON or is missing fields.
    /// `line` is 1-based, matching editor conventions.
    #[error("manifest parse error at line {line}: {message}")]
    ManifestParse { line: usize, message: String },

    /// Structurally well-formed input that violates a documented
    /// precondition (degenerate box, out-of-range threshold, ...).
    #[error("validation error: {0}")]
    Validation(String),
}

impl Error {
    /// Shorthand for [`Error::Validation`] with a formatted message.
    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }
}
