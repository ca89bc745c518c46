use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded in the objective direction")]
    Unbounded,

    #[error("simplex exceeded {0} iterations (numerical degeneracy)")]
    Degenerate(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("path enumeration exceeded the cap of {0} paths")]
    TooManyPaths(usize),

    #[error("game has {states} states, brute force is limited to {cap}")]
    GameTooLarge { states: usize, cap: usize },

    #[error("proposition regions are not aligned with the grid: {0}")]
    MisalignedPropositions(String),

    #[error("initial state {0:?} does not lie in a grid cell of the state space")]
    EmptyInitialCell(Vec<f64>),

    #[error("no initial product state: {0}")]
    LabelMismatch(String),

    #[error("grids are not nested: {0}")]
    NonNestedGrids(String),

    #[error("no admissible input at step {step}: {reason}")]
    ExtractionInfeasible { step: usize, reason: String },

    #[error("extraction did not reach the target within {0} steps")]
    StepLimit(usize),

    #[error("state left the domain at step {step}: {state:?}")]
    LeftDomain { step: usize, state: Vec<f64> },

    #[error("input {input:?} at step {step} is outside the input space")]
    InputOutOfRange { step: usize, input: Vec<f64> },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid problem:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
