use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Netlist syntax or structural problem, with the 1-based source line.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Semantically invalid input (bad config, unresolvable initial
    /// conditions, structural problems that are not netlist syntax).
    #[error("{0}")]
    Invalid(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A free node with no resistive path and no pin; the DC iteration
    /// has no equation for it.
    #[error("zero diagonal at node {node}")]
    ZeroDiagonal { node: String },

    #[error("no convergence at step {step} after {iters} iterations (residual {residual:e})")]
    NonConvergence {
        step: usize,
        iters: usize,
        residual: f64,
    },

    #[error("matrix not positive definite (pivot failure at row {row})")]
    NotPositiveDefinite { row: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
