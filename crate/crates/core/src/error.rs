use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid geometry, grid size or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model parameter outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    /// Diagnostic for the boundary decay fit; `node` is 0-based.
    #[error("nonpositive value {value} at node {node} inside the decay fit window")]
    NonPositive { node: usize, value: f64 },

    /// An iterative method hit its cap. Carries the best iterate seen.
    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
        trace: Vec<f64>,
    },

    /// A monotone sweep moved in the wrong direction: the discrete
    /// comparison principle has been violated.
    #[error("monotonicity violated at iteration {iteration}, node {node} (by {amount:e})")]
    Monotonicity {
        iteration: usize,
        node: usize,
        amount: f64,
    },

    /// Negative iterate in a solve that must stay positive.
    #[error("{0}")]
    Positivity(String),

    /// Two independent evaluations of the same quantity disagree.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// No admissible value found within the search range.
    #[error("infeasible: {message}")]
    Infeasible { message: String, trace: Vec<(f64, f64)> },

    /// Bisection bracket could not be established.
    #[error("bracket error: {message}")]
    Bracket {
        message: String,
        trace: Vec<(f64, bool)>,
    },

    #[error("mountain pass failed: {message}")]
    MountainPass {
        message: String,
        profile: Vec<f64>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
