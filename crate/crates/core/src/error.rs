use thiserror::Error;

/// Errors raised by the symbolic engine.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected N = {expected}, found N = {found}")]
    Dimension { expected: usize, found: usize },
    #[error("arity mismatch: expected {expected}, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("axis {} out of range 1..={dim}", .axis + 1)]
    Axis { axis: usize, dim: usize },
    #[error("slot {} out of range 1..={arity}", .slot + 1)]
    Slot { slot: usize, arity: usize },
    #[error("operator is in the wrong mode: expected {expected}")]
    Mode { expected: &'static str },
    #[error("unsupported operator class: {0}")]
    Unsupported(String),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("not exact: {0}")]
    NotExact(String),
    #[error("not closed: {0}")]
    NotClosed(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("not liftable: characteristic of A∘d/dx^{}_{} is nonzero", .axis + 1, .slot + 1)]
    NotLiftable { axis: usize, slot: usize },
    #[error("inconsistent data: {0}")]
    Inconsistent(String),
    #[error("truncation exceeded: {0}")]
    Truncation(String),
    #[error("invalid permutation: {0}")]
    Permutation(String),
    #[error("condition failed: {0}")]
    Condition(String),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
