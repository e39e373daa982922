use thiserror::Error;

/// Everything that can go wrong while building inputs or running an
/// estimator. Statistical "not defined here" outcomes (empty eroded window,
/// guarded J denominator) are not errors; they surface as `None` values and
/// flags in the result types.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid mark space: {0}")]
    InvalidMarkSpace(String),

    #[error("unknown mark label `{0}`")]
    UnknownMark(String),

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("pattern contains {count} duplicate location(s)")]
    DuplicateLocations { count: usize },

    #[error("invalid r grid: {0}")]
    InvalidRGrid(String),

    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("intensity {value} at ({x}, {y}) fell below the reported lower bound {bound}")]
    LowerBoundViolated {
        value: f64,
        bound: f64,
        x: f64,
        y: f64,
    },

    #[error("intensity {value} at ({x}, {y}) exceeds the thinning envelope {bound}")]
    EnvelopeViolated {
        value: f64,
        bound: f64,
        x: f64,
        y: f64,
    },

    #[error("mark sets C and D must be disjoint for the translation test")]
    MarkSetsOverlap,

    #[error("the translation test needs a torus-compatible intensity for the translated marks")]
    NotTorusCompatible,

    #[error("envelope rank {rank} needs at least {needed} replicates, got {got}")]
    TooFewReplicates {
        rank: usize,
        needed: usize,
        got: usize,
    },

    #[error("csv line {line}: {message}")]
    CsvRecord { line: u64, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
