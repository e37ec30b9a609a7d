use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kinematic matrix is singular (|det| = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("voltage {voltage} V outside supply range ±{limit} V")]
    VoltageOutOfRange { voltage: f64, limit: f64 },

    #[error("non-finite robot state at step {step}")]
    NonFiniteState { step: u64 },

    #[error("profile is empty")]
    EmptyProfile,

    #[error("time {t} s outside profile range [0, {duration})")]
    OutOfRange { t: f64, duration: f64 },

    #[error("series length mismatch: simulated {simulated}, measured {measured}")]
    LengthMismatch { simulated: usize, measured: usize },

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("non-finite cost while perturbing parameter {index}")]
    NonFiniteCost { index: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed data in {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
