use thiserror::Error;

use crate::autodiff::TapeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("inadmissible state: {0}")]
    Inadmissible(String),
    #[error("solver blow-up at step {step}: {reason}")]
    BlowUp { step: usize, reason: String },
    #[error("exact Riemann solver: {0}")]
    Riemann(String),
    #[error("action weights violate the simplex: {0}")]
    Simplex(String),
    #[error("reference trajectory too short: need step {needed}, have {available}")]
    ReferenceTooShort { needed: usize, available: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BlowUp { .. } | Error::Diverged(_) | Error::Riemann(_) | Error::Inadmissible(_) => 3,
            Error::Tape(TapeError::NonFinite { .. }) => 3,
            _ => 2,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
