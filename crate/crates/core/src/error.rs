use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format on line {line}: {message}")]
    UnsupportedFormat { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("face {face} is degenerate")]
    DegenerateFace { face: usize },

    #[error("{what} {index} has no neighbors")]
    NoNeighbor { what: &'static str, index: usize },

    #[error("surface has zero total area")]
    ZeroArea,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sample provenance mismatch: face {face} out of range for a mesh with {faces} faces")]
    Provenance { face: usize, faces: usize },

    #[error("mesh is not planar: vertex {vertex} has z = {z}")]
    NonPlanar { vertex: usize, z: f64 },

    /// `trace_csv` holds every trace row up to and including the bad one.
    #[error("optimization diverged at stage {stage}, iteration {iter}: loss = {loss}")]
    Divergence {
        stage: usize,
        iter: usize,
        loss: f64,
        trace_csv: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
