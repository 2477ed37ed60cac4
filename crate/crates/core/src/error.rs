use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A node whose vector is too short to be projected onto the sphere.
    #[error("degenerate field: |f| = {norm:e} at node {node}")]
    DegenerateField { node: usize, norm: f64 },

    #[error("field is not unit-norm: max | |n| - 1 | = {deviation:e} (tolerance {tolerance:e})")]
    NonUnitField { deviation: f64, tolerance: f64 },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("{path}:{line}: field `{field}`: {message}")]
    Config {
        path: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error("snapshot {path}: checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    Checksum {
        path: PathBuf,
        stored: u64,
        computed: u64,
    },

    #[error("records {path}: line {line}: {message}")]
    Records {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
