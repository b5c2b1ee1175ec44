// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

/// Failure classes; each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }

    pub fn data(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {err}"))
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
