use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the statistics, matching and pipeline routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least 2 samples, got {0}")]
    DegenerateSampleCount(usize),

    #[error("channel count mismatch: source has {source_channels}, target has {target_channels}")]
    ChannelMismatch {
        source_channels: usize,
        target_channels: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("value {value} out of range for {bins} bins")]
    ValueOutOfRange { value: usize, bins: usize },

    #[error("bin count mismatch: {0} vs {1}")]
    BinCountMismatch(usize, usize),

    #[error("probability {0} not in [0, 1]")]
    InvalidProbability(f64),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("duplicate dataset item: {}", .0.display())]
    DuplicateItem(PathBuf),

    #[error("failed to load {}: {reason}", path.display())]
    ItemLoad { path: PathBuf, reason: String },

    #[error("failed to write {}: {reason}", path.display())]
    OutputWrite { path: PathBuf, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("malformed FMT1 data at byte offset {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
