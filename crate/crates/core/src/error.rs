//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },

    #[error("{op}: expected a scalar node, got shape {shape:?}")]
    NotScalar { op: &'static str, shape: Vec<usize> },

    #[error("node {node} is not a leaf variable of this graph")]
    NotALeaf { node: usize },

    #[error("parameter leaf count mismatch: model has {expected}, gradient request has {got}")]
    LeafMismatch { expected: usize, got: usize },

    #[error("{what}: non-finite value encountered ({detail})")]
    NonFinite { what: &'static str, detail: String },

    #[error("multiplier array for family {family} has length {got}, point set has {expected}")]
    MultiplierLength { family: &'static str, expected: usize, got: usize },

    #[error("{0}")]
    Invalid(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::Invalid(msg.into())
    }
}
