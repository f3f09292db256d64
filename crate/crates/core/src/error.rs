use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum ArlError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("action {action} is not available in state {state}")]
    UnavailableAction { state: usize, action: usize },

    #[error("Q-learning update requires an observed reward, got the null reward")]
    NullReward,

    #[error("search needs at least one simulation")]
    ZeroSimulations,

    #[error("horizon {trials} exceeds the enumeration cap of {cap} trials")]
    HorizonTooLarge { trials: usize, cap: usize },

    #[error("agent `{agent}` cannot run on environment `{env}`: {reason}")]
    InvalidCombination {
        agent: String,
        env: String,
        reason: String,
    },

    #[error("records have ragged horizons ({expected} vs {found} steps)")]
    RaggedHorizons { expected: usize, found: usize },

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("empty parameter grid")]
    EmptyGrid,

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = ArlError> = std::result::Result<T, E>;

impl ArlError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        ArlError::InvalidParameter(msg.into())
    }

    pub(crate) fn mdp(msg: impl Into<String>) -> Self {
        ArlError::InvalidMdp(msg.into())
    }
}
