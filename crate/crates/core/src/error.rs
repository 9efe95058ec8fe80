//! Error type shared by the whole pipeline.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the analytics pipeline.
///
/// Variants are grouped by broad class so callers (the CLI in particular)
/// can map them onto exit codes: data problems vs. numeric failures vs.
/// caller mistakes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // ---- data / ingestion ----
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: unparseable row: {reason}")]
    BadRow {
        file: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{file}:{line}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp {
        file: PathBuf,
        line: u64,
        timestamp: String,
    },
    #[error("need at least 2 tickers, found {found}")]
    TooFewTickers { found: usize },
    #[error("no index series named {name:?} in {path}")]
    MissingIndex { name: String, path: PathBuf },
    #[error("ticker {ticker} has no observed values")]
    AllMissingColumn { ticker: String },
    #[error("non-positive price for {ticker} at row {row}")]
    NonPositivePrice { ticker: String, row: usize },
    #[error("panel has {rows} rows, fewer than the window length {window}")]
    TooFewRows { rows: usize, window: usize },
    #[error("lag {lag} must be at least 1 and smaller than the window count {windows}")]
    BadLag { lag: usize, windows: usize },
    #[error("need at least {needed} windows for horizon {horizon}, have {have}")]
    TooFewWindows {
        needed: usize,
        have: usize,
        horizon: String,
    },

    // ---- contract violations ----
    #[error("invalid bin rule: {0}")]
    InvalidBinRule(String),
    #[error("label series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("series too short: {len} < {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("weight matrix violates {0}")]
    InvalidMatrix(&'static str),
    #[error("histogram grids do not match ({left} vs {right} bins)")]
    GridMismatch { left: usize, right: usize },
    #[error("strength {value} falls outside the histogram grid [0, {upper})")]
    OutsideGrid { value: f64, upper: f64 },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("unknown metric {name:?}; available: {available}")]
    UnknownMetric { name: String, available: String },

    // ---- numeric failures ----
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("graph has zero total weight")]
    ZeroTotalWeight,
    #[error("prior average strength is zero at window {window}")]
    ZeroPriorStrength { window: usize },
    #[error("predictor is constant; cannot fit a regression")]
    ConstantPredictor,
    #[error("target is constant; fit quality is undefined")]
    ConstantTarget,
    #[error("rank-deficient design matrix in column {0}")]
    RankDeficient(usize),
    #[error("objective became non-finite during optimization")]
    NonFiniteObjective,
    #[error("estimated MA polynomial is not invertible")]
    NonInvertibleMa,
    #[error("all {attempted} candidate ARIMA fits failed")]
    AllFitsFailed { attempted: usize },
}

impl Error {
    /// Broad failure class, used by the CLI to pick an exit code.
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Io { .. } | BadRow { .. } | DuplicateTimestamp { .. } | TooFewTickers { .. }
            | MissingIndex { .. } | AllMissingColumn { .. } | NonPositivePrice { .. }
            | TooFewRows { .. } | BadLag { .. } | TooFewWindows { .. } => ErrorClass::Data,
            InvalidBinRule(_) | LengthMismatch { .. } | SeriesTooShort { .. }
            | InvalidMatrix(_) | GridMismatch { .. } | OutsideGrid { .. }
            | InvalidArgument(_) | UnknownMetric { .. } => ErrorClass::Usage,
            NoConvergence { .. } | ZeroTotalWeight | ZeroPriorStrength { .. }
            | ConstantPredictor | ConstantTarget | RankDeficient(_) | NonFiniteObjective
            | NonInvertibleMa | AllFitsFailed { .. } => ErrorClass::Numeric,
        }
    }
}

/// Coarse error category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad arguments or contract violations by the caller.
    Usage,
    /// Problems with the input data.
    Data,
    /// Numerical failure during fitting or optimization.
    Numeric,
}
