use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter domain violation: {0}")]
    Domain(String),

    #[error("invalid sampling grid: {0}")]
    Grid(String),

    #[error("non-positive variance at index {index}: {value}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("non-positive price at index {index}: {value}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("series too short: need at least {need} values, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("point outside the cone S: u={u}, v={v}, w={w}")]
    OutsideCone { u: f64, v: f64, w: f64 },

    #[error("degenerate sufficient statistics: {0}")]
    Degenerate(String),

    #[error("consistent estimator unavailable: {0}")]
    ConsistentUnavailable(String),

    #[error("correlation undefined: {0}")]
    CorrelationUndefined(String),

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("trajectory dismissed at step {step} (variance {value} <= 0)")]
    Dismissed { step: usize, value: f64 },

    #[error("invalid accuracy spec: {0}")]
    Spec(String),

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("invalid OHLC bar at index {index}: {msg}")]
    InvalidBar { index: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
