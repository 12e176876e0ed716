use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid session {id}: {reason}")]
    InvalidSession { id: u32, reason: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("schedule shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solver failed: {0}")]
    Solver(#[from] miqp::SolverError),

    #[error("no feasible schedule: {0}")]
    Infeasible(String),

    #[error("planning step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<CoreError>,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;
