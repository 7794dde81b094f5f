use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("unknown correlation regime `{0}` (valid: none, moderate, strong)")]
    UnknownRegime(String),

    #[error("Cholesky factorization failed at pivot {pivot} (value {value:e})")]
    Factorization { pivot: usize, value: f64 },

    #[error("expected {expected} demand, instance has {found} demand")]
    WrongDemandVariant {
        expected: &'static str,
        found: &'static str,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no scenarios")]
    NoScenarios,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing input: {0}")]
    Missing(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("{0}; use the greedy solver instead")]
    ExactLimit(String),

    #[error("dispatch {value} of generator {generator} at period {period} is not representable with {bits} bits")]
    NotRepresentable {
        generator: usize,
        period: usize,
        value: f64,
        bits: u32,
    },

    #[error("bitstring length {found} does not match {expected} variables")]
    Length { expected: usize, found: usize },

    #[error("duplicate key {0}")]
    DuplicateKey(String),

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("LP solver failure: {0}")]
    Lp(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
