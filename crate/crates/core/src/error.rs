// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("git {command} failed: {message}")]
    Git { command: String, message: String },

    #[error("invalid ticket pattern: {0}")]
    Pattern(String),

    #[error("ticket log line {line}: {message}")]
    TicketLog { line: usize, message: String },

    #[error("dataset line {line}: {message}")]
    DatasetFormat { line: usize, message: String },

    #[error("dataset schema version {found} is not supported (this build reads version {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("ruleset line {line}: {message}")]
    RuleParse { line: usize, message: String },

    #[error("dataset has not been traced: {0}")]
    NotTraced(String),

    #[error("feedback conflict: {0}")]
    Conflict(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
