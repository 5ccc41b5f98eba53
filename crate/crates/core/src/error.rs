use alloc::string::String;

/// Errors produced by validation and the solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("negative or non-finite parameter {what}[{index}] = {value}")]
    NegativeParameter {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("rate {what}[{index}] = {value} is outside [0, 1]")]
    RateOutOfRange {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("invalid catalog: {0}")]
    InvalidCatalog(&'static str),
    #[error("max-min regularizer needs one shared weight, found beta[{index}] = {value} != {first}")]
    UnequalMaxMinWeight { index: usize, value: f64, first: f64 },
    #[error("H = {h} is smaller than the item count {items}")]
    InvalidH { h: usize, items: usize },
    #[error("estimator covers {expected} items but the catalog has {got}")]
    UnknownItem { expected: usize, got: usize },
    #[error("instance too large to enumerate ({items}^{rounds} assignments > {limit})")]
    TooLarge { items: usize, rounds: u64, limit: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
