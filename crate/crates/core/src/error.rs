use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("no feature vector for node `{0}`")]
    MissingNodeFeature(String),

    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("realization matrix exhausted for arc {arc} (column {column})")]
    Exhausted { arc: usize, column: usize },

    #[error("target set is empty: every node is already activated")]
    AllActivated,

    #[error("enumeration needs {needed} matrices, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("graph is not subcritical (p_max * d_max = {0})")]
    NotSubcritical(f64),

    #[error("configuration: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
