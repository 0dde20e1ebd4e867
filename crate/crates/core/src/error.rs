use std::path::PathBuf;

use thiserror::Error;

use crate::volume::VolumeShape;

/// Everything that can go wrong in the segmentation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt payload: {0}")]
    Corruption(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch {
        expected: VolumeShape,
        actual: VolumeShape,
    },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("capacity exceeded: {nodes} nodes > limit {limit}")]
    Capacity { nodes: usize, limit: usize },

    #[error("synth spec error: {0}")]
    Spec(String),
}

impl Error {
    /// I/O failure on `path`.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
