use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported tile format: {}", .0.display())]
    UnsupportedTileFormat(PathBuf),
    #[error("corrupt tile: {}: {detail}", .path.display())]
    CorruptTile { path: PathBuf, detail: String },
    #[error("offset not on grid: ({0}, {1})")]
    OffsetNotOnGrid(f64, f64),
    #[error("empty footprint")]
    EmptyFootprint,
    #[error("no detectable mode")]
    NoDetectableMode,
    #[error("empty waveform")]
    EmptyWaveform,
    #[error("disjoint waveforms")]
    DisjointWaveforms,
    #[error("degenerate waveform")]
    DegenerateWaveform,
    #[error("constant input")]
    ConstantInput,
    #[error("not a distribution")]
    NotADistribution,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("missing percentile: {0}")]
    MissingPercentile(u32),
    #[error("zero variance")]
    ZeroVariance,
    #[error("empty input")]
    EmptyInput,
    #[error("undefined rRMSE: mean of reference values is zero")]
    UndefinedRrmse,
    #[error("nothing to correct")]
    NothingToCorrect,
    #[error("no datum coverage")]
    NoDatumCoverage,
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error: {}:{line}: {detail}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
