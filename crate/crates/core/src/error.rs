use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no uncensored events")]
    NoUncensoredEvents,

    #[error("degenerate hazard: scale must be positive for a finite event time")]
    DegenerateHazard,

    #[error("degenerate subject: combined cause-specific hazard is zero")]
    DegenerateSubject,

    #[error("collinear covariates")]
    CollinearCovariates,

    #[error("Newton-Raphson did not converge after {iterations} iterations (gradient trace: {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },

    #[error("no events of cause {0} to fit")]
    NoEvents(u8),

    #[error("censoring support exhausted before horizon {0}")]
    CensoringExhausted(f64),

    #[error("no comparable pairs")]
    NoComparablePairs,

    #[error("empty group")]
    EmptyGroup,

    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}, column `{column}`: {message}")]
    BadValue {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unsupported model schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("unknown model kind `{0}`")]
    UnknownModelKind(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical routines (as opposed to bad data or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateHazard
                | Error::DegenerateSubject
                | Error::CollinearCovariates
                | Error::NonConvergence { .. }
                | Error::CensoringExhausted(_)
                | Error::NoComparablePairs
        )
    }
}
