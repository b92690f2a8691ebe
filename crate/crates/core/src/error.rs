use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by construction, parsing and the numerical solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("syntax error at byte {offset}: expected one of [{}], found {found}", expected.join(", "))]
    Syntax { offset: usize, expected: Vec<String>, found: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("non-finite value in {component} at ({x_slow}, {x_fast})")]
    NonFiniteField { component: String, x_slow: f64, x_fast: f64 },

    #[error("CFL violation: dt = {dt} exceeds stable limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite solution value at node {node}, step {step}")]
    NonFiniteSolution { node: usize, step: usize },

    #[error("monotonicity certificate failed at {count} nodes")]
    Monotonicity { count: usize },

    #[error("table coverage violation at x = {x}, p = {p}, A = {a}")]
    Coverage { x: f64, p: f64, a: f64 },

    #[error("gate failed: {0}")]
    Gate(String),

    #[error("relaxation did not converge within {steps} steps (alpha = {alpha})")]
    NotConverged { alpha: f64, steps: usize },

    #[error("non-finite state on path {path} at step {step}")]
    NonFiniteState { path: usize, step: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
