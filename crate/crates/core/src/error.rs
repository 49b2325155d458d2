use std::path::PathBuf;

use thiserror::Error;

use crate::grid::{CellId, GeoPoint};

pub type Result<T, E = GeoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("point ({}, {}) lies outside the partitioned region", .0.lat, .0.lon)]
    OutOfRegion(GeoPoint),

    #[error("cell ({}, {}) is not part of a {g}x{g} grid", .cell.row, .cell.col)]
    InvalidCell { cell: CellId, g: usize },

    #[error("context {0:?} was never observed")]
    UndefinedContext(String),

    #[error("cannot build an ensemble from an empty training set")]
    EmptyTrainingSet,

    #[error("post {0:?} has no location")]
    MissingLocation(String),

    #[error("degenerate ensemble: no cell carries posterior mass for post {0:?}")]
    DegenerateEnsemble(String),

    #[error("nothing to evaluate: {0}")]
    EmptyEvaluation(String),

    #[error("tuning failed for g={g}: {source}")]
    Tuning {
        g: usize,
        #[source]
        source: Box<GeoError>,
    },

    #[error("model directory {path}: {reason}")]
    ModelFormat { path: PathBuf, reason: String },

    #[error("unsupported model format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GeoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GeoError::Io {
            path: path.into(),
            source,
        }
    }
}
