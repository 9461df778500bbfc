use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the deformation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate nine-dot grid: k_p = {0} collapses points onto the center lines")]
    DegenerateGrid(f64),

    #[error("pattern space exhausted: requested {requested} variants, only {available} exist")]
    Exhausted { requested: u64, available: u64 },

    #[error("no contour point within {xi} degrees of ray angle {beta} degrees")]
    NoIntersection { beta: f64, xi: f64 },

    #[error("degenerate region: only {found} contour handles found, need at least 3")]
    DegenerateRegion { found: usize },

    #[error("mask has no foreground pixels")]
    EmptyObject,

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },

    #[error("missing mask for {0}")]
    MissingMask(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
