use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}` in input header")]
    MissingColumn(String),

    #[error("coordinate ({lon}, {lat}) lies outside the {zone} validity zone")]
    OutsideZone {
        zone: &'static str,
        lon: f64,
        lat: f64,
    },

    #[error("degenerate extent: {0}")]
    DegenerateExtent(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("every entry of the target block is masked")]
    FullyMasked,

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("unknown architecture `{0}` (valid: vanilla, gwann, gtwnn, gtwnn_ls, gtwnn_lst, hdgtwnn, hdgtwnn_ls, hdgtwnn_lst)")]
    UnknownArchitecture(String),

    #[error("malformed container: {0}")]
    Format(String),
}
