use std::path::PathBuf;

use crate::types::RiskLevel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("class table: {0}")]
    ClassTable(String),

    #[error("class id {id} at pixel ({x}, {y}) is not in the class table ({n} classes)")]
    InvalidClassId { x: usize, y: usize, id: u8, n: usize },

    #[error("risk value {value} at pixel ({x}, {y}) is outside 0..=5")]
    InvalidRisk { x: usize, y: usize, value: u8 },

    #[error("raster dimensions must be nonzero and match the data length ({width}x{height}, {len} values)")]
    BadShape { width: usize, height: usize, len: usize },

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch { left_w: usize, left_h: usize, right_w: usize, right_h: usize },

    #[error("expected {expected} channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("non-finite score at pixel ({x}, {y}) channel {channel}")]
    NonFiniteScore { x: usize, y: usize, channel: usize },

    #[error("no evaluable class")]
    NoEvaluableClass,

    #[error("empty confusion matrix")]
    EmptyMatrix,

    #[error("grouping does not cover class {0}")]
    GroupingMissing(usize),

    #[error("grouping maps class {class} to group {group}, but only {n_groups} groups exist")]
    GroupOutOfRange { class: usize, group: usize, n_groups: usize },

    #[error("unknown color ({r}, {g}, {b}) at pixel ({x}, {y})")]
    UnknownColor { x: usize, y: usize, r: u8, g: u8, b: u8 },

    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },

    #[error("png: {0}")]
    Png(String),

    #[error("colormap: {0}")]
    Colormap(String),

    #[error("config: {0}")]
    Config(String),

    #[error("no frames")]
    NoFrames,

    #[error("no prediction for {0}")]
    UnmatchedFile(PathBuf),

    #[error("threshold {0} above the highest risk level")]
    BadThreshold(u8),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File { path: path.into(), source: Box::new(self) }
    }

    pub(crate) fn risk_out_of_range(x: usize, y: usize, value: u8) -> Self {
        debug_assert!(value > RiskLevel::MAX.get());
        Error::InvalidRisk { x, y, value }
    }
}
