use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("panel has no columns")]
    EmptyPanel,

    #[error("invalid copula parameter: {0}")]
    InvalidParameter(String),

    #[error("inverse h-function did not converge: {0}")]
    NonConvergence(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("copula fit failed: {0}")]
    FitFailure(String),

    #[error("missing interest-rate series for currency {0}")]
    MissingRateSeries(String),

    #[error("covariance factorization failed: {0}")]
    CovarianceFailure(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("scenario set is empty")]
    EmptyScenarios,

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("non-numeric cell at line {line}, column `{column}`: {value:?}")]
    NonNumericCell {
        line: usize,
        column: String,
        value: String,
    },

    #[error("invalid structure matrix: {0}")]
    InvalidStructure(String),

    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("column `{column}`: {source}")]
    Column {
        column: String,
        #[source]
        source: Box<Error>,
    },

    #[error("edge {edge}: {source}")]
    Edge {
        edge: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("replayed output `{0}` differs from the recorded digest")]
    ReplayMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn in_column(self, column: impl Into<String>) -> Self {
        Error::Column {
            column: column.into(),
            source: Box::new(self),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, with column/edge/stage context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Column { source, .. }
            | Error::Edge { source, .. }
            | Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
