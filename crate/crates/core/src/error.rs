use std::io;

use thiserror::Error;

/// Errors raised by the tensor-network compressed-sensing pipeline.
#[derive(Debug, Error)]
pub enum TncsError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("measurement at site {site} has zero probability")]
    ZeroProbability { site: usize },

    #[error("image cannot be encoded: projection at site {site} has zero probability")]
    EncodeImpossible { site: usize },

    #[error("sample {index} has zero probability under the model (infinite NLL)")]
    InfiniteNll { index: usize },

    #[error("training diverged after {} sweeps", .report.sweeps_run)]
    TrainingDiverged { report: crate::trainer::TrainReport },

    #[error("every model assigns zero probability to the image")]
    Unclassifiable,

    #[error("{active} active sites exceed the state-vector limit of {limit}")]
    TooLarge { active: usize, limit: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TncsError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        TncsError::Argument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        TncsError::Format(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, TncsError>;
