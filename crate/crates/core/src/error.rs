use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spacing ({0}, {1}, {2}): every component must be positive")]
    InvalidSpacing(f64, f64, f64),

    #[error("invalid dimensions {0:?}: every axis must be at least 1")]
    InvalidDims([usize; 3]),

    #[error("data length {actual} does not match grid size {expected}")]
    DataLength { expected: usize, actual: usize },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("target spacing must be positive, got {0}")]
    InvalidTargetSpacing(f64),

    #[error("VOI radius {0} mm is below the {1} mm floor")]
    VoiTooSmall(f64, f64),

    #[error("diameter must be positive, got {0}")]
    InvalidDiameter(f64),

    #[error("volume must be positive, got {0}")]
    InvalidVolume(f64),

    #[error("mask has no foreground voxels")]
    EmptyMask,

    #[error("VOI does not intersect the grid")]
    VoiOutsideGrid,

    #[error("VOI contains no non-nodule voxels")]
    VoiFilledByNodule,

    #[error("malformed XML: {0}")]
    Xml(String),

    #[error("malignancy score {0} outside 1..=5")]
    ScoreOutOfRange(i64),

    #[error("region on z={z} has {points} boundary points, at least 3 are required")]
    DegenerateRegion { z: f64, points: usize },

    #[error("empty cluster")]
    EmptyCluster,

    #[error("contingency table is degenerate: {0}")]
    DegenerateTable(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("feature {0} is constant")]
    ConstantFeature(usize),

    #[error("feature arity mismatch: model has {expected}, input has {actual}")]
    ArityMismatch { expected: usize, actual: usize },

    #[error("labels contain a single class")]
    SingleClass,

    #[error("metaimage header {path}: {msg}")]
    Header { path: PathBuf, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
