use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected dim={expected}, got dim={got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate in point")]
    NonFinite,

    #[error("negative weight {0}")]
    NegativeWeight(f64),

    #[error("points and weights differ in length ({points} vs {weights})")]
    LengthMismatch { points: usize, weights: usize },

    #[error("center set is empty")]
    EmptyCenters,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("need at least k={k} points, got n={n}")]
    TooFewPoints { n: usize, k: usize },

    #[error("retry budget of {0} attempts exhausted: {1}")]
    RetriesExhausted(usize, String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("combinatorial guard exceeded: C({n}, {k}) > {limit}")]
    TooManySubsets { n: usize, k: usize, limit: u64 },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

/// Errors raised while reading the point-set text format. Line numbers are 1-based.
#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: malformed header {text:?}")]
    MalformedHeader { line: usize, text: String },

    #[error("line {line}: expected {expected} values, found {got}")]
    RowLength {
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("line {line}: cannot parse {token:?} as a number")]
    BadNumber { line: usize, token: String },

    #[error("line {line}: non-finite value {token:?}")]
    NonFinite { line: usize, token: String },

    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: usize, weight: f64 },

    #[error("header announced {expected} rows, found {got}")]
    RowCount { expected: usize, got: usize },
}
