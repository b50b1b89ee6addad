use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library and surfaced by the CLI as exit codes
/// (configuration/dimension problems map to 2, file problems to 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn shape(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::ShapeMismatch {
            expected_rows: expected.0,
            expected_cols: expected.1,
            rows: got.0,
            cols: got.1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
