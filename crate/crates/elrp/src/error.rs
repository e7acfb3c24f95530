//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("instance file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("no feasible solution{}", format_unserved(.unserved))]
    Infeasible { unserved: Vec<usize> },

    #[error("instance too large for exhaustive solve: {0}")]
    TooLarge(String),

    #[error("cannot decode assignment: {0}")]
    Decode(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown parameter key: {0}")]
    UnknownParameter(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_unserved(unserved: &[usize]) -> String {
    if unserved.is_empty() {
        String::new()
    } else {
        format!(" (unserved customers: {unserved:?})")
    }
}

pub type Result<T> = std::result::Result<T, Error>;
