use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = TsrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TsrError {
    #[error("pixel set is empty")]
    EmptyPixelSet,

    #[error("pixel set is not a single 4-connected component")]
    Disconnected,

    #[error("interface must be positive")]
    ZeroInterface,

    #[error("side length must be at least 1")]
    EmptyImage,

    #[error("scale {k} outside 1..={side}")]
    ScaleOutOfRange { k: usize, side: usize },

    #[error("occupancy {n} outside 0..={cells}")]
    OccupancyOutOfRange { n: usize, cells: usize },

    #[error("occupancy total {total} outside 0..={max}")]
    TotalOutOfRange { total: usize, max: usize },

    #[error("target histogram maximum is zero")]
    DegenerateHistogram,

    #[error("cluster area {0} too small for a swap (need at least 2)")]
    AreaTooSmall(usize),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("synthesis of cluster {index} failed: interface {interface} != target {target} after all restarts")]
    SynthesisFailed {
        index: usize,
        interface: usize,
        target: usize,
    },

    #[error("packing failure: could not place cluster {cluster} without contact")]
    PackingFailure { cluster: usize },

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("scale set mismatch between configuration and cost context")]
    ScaleMismatch,

    #[error("image size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed image {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error("malformed library: {0}")]
    Library(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
