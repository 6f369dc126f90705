//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by loading, list construction, mechanisms and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A line of an input file could not be parsed. Carries the 1-based line
    /// number of the offending line.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally invalid file contents (duplicate tokens, bad header...).
    #[error("format error: {0}")]
    Format(String),

    /// A list file failed its integrity check.
    #[error("corrupt list file: {0}")]
    Corrupt(String),

    #[error("embedding file contains no usable rows")]
    EmptyModel,

    /// A word was looked up that is not a member of the list/model/bank.
    #[error("word {0:?} not found")]
    Membership(String),

    /// Caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid run configuration; lists every offending field.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
}

impl Error {
    /// Process exit code for the CLI. Distinct codes per error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 3,
            Error::Contract(_) | Error::Membership(_) => 4,
            Error::Parse { .. } | Error::Format(_) | Error::Corrupt(_) | Error::EmptyModel => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
