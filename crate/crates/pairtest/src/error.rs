use thiserror::Error;

/// Errors produced by sample loading, kernel evaluation and test construction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("paired samples must have equal row counts: {left} vs {right}")]
    PairedRowMismatch { left: usize, right: usize },

    #[error("sample must have at least one row and one column")]
    EmptySample,

    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("exponent q must lie in (0, 2], got {0}")]
    InvalidExponent(f64),

    #[error("Gaussian kernel parameter sigma must be positive, got {0}")]
    InvalidSigma(f64),

    #[error("weights must sum to zero, |sum| = {0:e}")]
    WeightsNotZeroSum(f64),

    #[error("all pairwise distances are zero; median bandwidth is undefined")]
    DegenerateMedian,

    #[error("gram matrix must be square, got {rows}x{cols}")]
    NonSquareGram { rows: usize, cols: usize },

    #[error("gram matrix of {rows} rows exceeds the configured cap of {cap}")]
    GramTooLarge { rows: usize, cap: usize },

    #[error(
        "the spectral null requires equal sample sizes (m = {m}, n = {n}); \
         use the resample method for unequal sizes"
    )]
    UnequalSampleSizes { m: usize, n: usize },

    #[error("spectrum is empty after truncation")]
    EmptySpectrum,

    #[error("alpha must lie in {range}, got {alpha}")]
    InvalidAlpha { alpha: f64, range: &'static str },

    #[error("the quadratic-bound null defines a threshold but no p-value")]
    NoPValue,

    #[error("benchmark `{benchmark}` does not produce {expected} data")]
    WrongBenchmarkKind {
        benchmark: &'static str,
        expected: &'static str,
    },

    #[error("invalid benchmark parameter: {0}")]
    InvalidBenchmark(String),

    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },

    #[error("csv row {row} has {got} columns, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
