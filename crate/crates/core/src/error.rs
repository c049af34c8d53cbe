use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("residue {residue} is not coprime to modulus {modulus}")]
    InvalidResidue { residue: u64, modulus: u64 },

    #[error("{value} lies outside the materialized range (limit {limit})")]
    OutOfRange { value: u64, limit: u64 },

    #[error("interval {j} is degenerate: 1/{prime} alone exceeds the reciprocal budget {budget}")]
    DegenerateInterval { j: usize, prime: u64, budget: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{n} has {count} divisors, more than the supported {max}")]
    TooManyDivisors { n: u64, count: u64, max: u64 },

    #[error("requested {requested} intervals but only {available} are available")]
    Dimension { requested: usize, available: usize },

    #[error("outside the validity range of the closed formula: {0}")]
    ValidityRange(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
