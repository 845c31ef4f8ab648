use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An objective or constraint produced NaN or infinity.
    #[error("evaluation of {what} at level {level:?} produced a non-finite value at {point:?}")]
    Evaluation {
        level: Option<usize>,
        what: String,
        point: Vec<f64>,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid problem definition: {0}")]
    Problem(String),

    /// The starting point handed to the engine is not feasible.
    #[error("start point violates constraint `{constraint}` of level {level} (residual {residual:e})")]
    InfeasibleStart {
        level: usize,
        constraint: String,
        residual: f64,
    },

    #[error("no feasible start found (max constraint violation {violation:e})")]
    NoFeasibleStart { violation: f64 },

    #[error("solver hit its iteration limit: {0}")]
    IterationLimit(String),

    /// A per-level solve used by a baseline method failed.
    #[error("level {level} solve failed: {reason}")]
    Solve { level: usize, reason: String },

    #[error("grid search would visit {requested} points, budget is {budget}")]
    GridBudget { requested: u128, budget: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
