use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator and its harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vehicle has zero speed; body frame is undefined")]
    ZeroSpeed,
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("engagement is over: now={now} s >= t_max={t_max} s")]
    HorizonExhausted { now: f64, t_max: f64 },
    #[error("times must be strictly increasing")]
    NonMonotonicTimes,
    #[error("no active targets")]
    NoActiveTargets,
    #[error("trajectories are on different time grids")]
    GridMismatch,
    #[error("empty time grid")]
    EmptyGrid,
    #[error("invalid cluster count k={k} for {samples} samples")]
    InvalidClusterCount { k: usize, samples: usize },
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("time-to-go must be positive, got {0}")]
    NonPositiveTimeToGo(f64),
    #[error("zero separation between interceptor and target")]
    ZeroSeparation,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
