use std::path::PathBuf;

use thiserror::Error;

use crate::environment::Cell;

/// Everything that can go wrong while building or running a game.
#[derive(Debug, Error)]
pub enum Error {
    #[error("map line {line}: {message}")]
    Map { line: usize, message: String },

    #[error("cell {0} is not a feasible cell of the environment")]
    InfeasibleCell(Cell),

    #[error("cell {0} is not a station")]
    NotAStation(Cell),

    #[error("cycle length must be between 1 and {max}, got {got}")]
    CycleLength { got: usize, max: usize },

    #[error("trajectory enumeration exceeded the limit of {limit} trajectories")]
    EnumerationOverflow { limit: usize },

    #[error("joint action space has {size} profiles, above the limit of {limit}")]
    ProfileLimit { size: u128, limit: u128 },

    #[error("empty trajectory list")]
    EmptyTrajectorySet,

    #[error("invalid task {index}: {message}")]
    Task { index: usize, message: String },

    #[error("invalid profile: {0}")]
    Profile(String),

    #[error("invalid learner parameters: {0}")]
    Params(String),

    #[error("invalid value {0:?}: expected a positive decimal with at most 6 fractional digits")]
    Value(String),

    #[error("scenario field `{field}`: {message}")]
    Scenario { field: String, message: String },

    #[error("action cache {path}: {message}")]
    Cache { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn scenario(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
