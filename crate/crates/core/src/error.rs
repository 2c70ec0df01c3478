use thiserror::Error;

/// Errors raised by graph construction, estimation and the application layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid edge ({0}, {1}): self-loops are not allowed")]
    InvalidEdge(usize, usize),

    #[error("node index {index} out of range for a network of {node_count} nodes")]
    IndexOutOfRange { index: usize, node_count: usize },

    #[error("network needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },

    #[error("no connected graph generated after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),

    #[error("edge list parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("measurement values must be finite (node {0})")]
    NonFinite(usize),

    #[error("step schedule violates the decay-rate conditions: {0}")]
    Schedule(String),

    #[error("trim band [{lower}, {upper}] contains no node")]
    DegenerateTrim { lower: f64, upper: f64 },

    #[error("ratio consensus did not converge: denominator {0:e} at node {1}")]
    NotConverged(f64, usize),

    #[error("iteration budget overflow: {realizations} realizations x {iterations} iterations")]
    BudgetOverflow {
        realizations: usize,
        iterations: u64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
