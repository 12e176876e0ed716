use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("QP iteration limit reached after {iterations} iterations")]
    IterationLimit { iterations: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}
