use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("mesh has no triangles after cleanup ({dropped} degenerate dropped)")]
    EmptyMesh { dropped: usize },

    #[error("{count} triangle(s) lie outside the voxel bounds (first ids: {ids:?})")]
    OutOfBounds { count: usize, ids: Vec<usize> },

    #[error("voxel grid has no occupied cells; cannot seed the jump flood")]
    NoSeeds,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field format error: {0}")]
    Format(String),

    #[error("unsupported field file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("field file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("index {index} out of range for axis of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
