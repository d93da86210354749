use std::path::PathBuf;

use thiserror::Error;

/// Process exit status for user mistakes (bad flags, bad config, violated
/// parameter inequalities).
pub const EXIT_USER: u8 = 2;
/// Process exit status for internal failures.
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ternvote::Error),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("invalid input: {0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(ternvote::Error::Internal(_)) | CliError::Write { .. } => EXIT_INTERNAL,
            _ => EXIT_USER,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
