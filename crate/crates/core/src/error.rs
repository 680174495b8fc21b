use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} at {location}")]
    NonFinite { value: f64, location: String },

    #[error("sample too small: need at least {needed} points, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error(
        "reference family degenerate (tau = {tau}): curvature is ~0, supply a bandwidth manually"
    )]
    DegenerateReference { tau: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("kendall tau {0} is outside the range attainable by the Frank family")]
    TauOutOfRange(f64),

    #[error("quadrature did not converge: {0}")]
    NoConvergence(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 1,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) | Error::Data(_) => 2,
            Error::SampleTooSmall { .. } | Error::DegenerateSample(_) => 2,
            Error::NonFinite { .. }
            | Error::DegenerateReference { .. }
            | Error::TauOutOfRange(_)
            | Error::NoConvergence(_) => 3,
        }
    }
}
