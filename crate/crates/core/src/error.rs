use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({lat}, {lon}) lies outside the fault geometry region")]
    OutsideGeometry { lat: f64, lon: f64 },

    #[error("invalid rupture depth {depth_km} km (must lie below the surface)")]
    InvalidDepth { depth_km: f64 },

    #[error("wave simulation unstable at step {step}: |eta| = {value} m")]
    Unstable { step: usize, value: f64 },

    #[error("{0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("chain {chain} starts with zero posterior density")]
    Initialization { chain: usize },

    #[error("cannot resample: every chain has zero posterior weight")]
    Resample,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end: 1 for configuration
    /// problems, 2 for numerical failures, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 1,
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}
