use alloc::string::String;

use crate::grid::Product;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("geometry or provenance mismatch: {0}")]
    Mismatch(String),

    #[error("location ({east}, {north}) lies outside the grid")]
    OutsideGrid { east: f64, north: f64 },

    #[error("insufficient data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate predictor: zero variance")]
    DegeneratePredictor,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("feature arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing decision for product {0}")]
    MissingDecision(Product),

    #[error("duplicate key: {0}")]
    DuplicateKey(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty result: {0}")]
    Empty(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
