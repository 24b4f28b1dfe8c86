//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("stale tape: parameters were updated after the forward pass (tape version {tape}, store version {store})")]
    StaleTape { tape: u64, store: u64 },

    #[error("non-finite gradient in parameter '{0}'; update aborted, gradients cleared")]
    NonFiniteGradient(String),

    #[error("non-finite loss in {0}; update skipped")]
    NonFiniteLoss(String),

    #[error("empty candidate set: zero sampling budget and no prior")]
    EmptyCandidates,

    #[error("all candidate values are non-finite")]
    AllCandidatesNonFinite,

    #[error("replay memory holds {len} transitions but training starts at {start}")]
    ReplayTooSmall { len: usize, start: usize },

    #[error("action-out architecture infeasible: {bins}^{dims} = {count} actions exceeds the ceiling of {ceiling}")]
    ActionOutInfeasible {
        bins: usize,
        dims: usize,
        count: u128,
        ceiling: u128,
    },

    #[error("unknown preset '{0}'; see `list-presets`")]
    UnknownPreset(String),

    #[error("unknown environment id '{0}'")]
    UnknownEnv(String),

    #[error("invalid setting '{key}': {msg}")]
    Setting { key: String, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("environment fault: {0}")]
    EnvFault(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for a `Setting` error.
    pub fn setting(key: &str, msg: impl Into<String>) -> Self {
        Error::Setting {
            key: key.to_string(),
            msg: msg.into(),
        }
    }
}
