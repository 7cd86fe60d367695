use thiserror::Error;

/// Errors raised by the geometry, inference and file-format layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a chain needs at least 2 states, got {0}")]
    TooFewStates(usize),

    #[error("state {state} is out of range for {num_states} states")]
    OutOfRangeState { state: usize, num_states: usize },

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("graph is not strongly connected: no path from {from} to {to}")]
    NotStronglyConnected { from: usize, to: usize },

    #[error("({0}, {1}) is not an edge of the graph")]
    UnknownEdge(usize, usize),

    #[error("expected {expected} edge values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("value {value} on edge ({x}, {y}) is not strictly positive")]
    NonPositiveValue { x: usize, y: usize, value: f64 },

    #[error("scale factor must be positive, got {0}")]
    NonpositiveScale(f64),

    #[error("arguments live on different graphs")]
    GraphMismatch,

    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("edge function is not a transition probability (row {state} sums to {sum})")]
    NotTransitionProbability { state: usize, sum: f64 },

    #[error("edge function is neither a transition probability nor a positive transition measure (root {root})")]
    NotPositiveTransitionMeasure { root: f64 },

    #[error("point does not satisfy the normalization condition (mass {0})")]
    NotInMtilde(f64),

    #[error("projection did not converge within {iterations} iterations (gradient norm {gradient_norm:e})")]
    ProjectionNoConvergence { iterations: usize, gradient_norm: f64 },

    #[error("Hessian assembly is asymmetric by {0:e}")]
    AsymmetricHessian(f64),

    #[error("invalid generator {name}: {reason}")]
    InvalidGenerator { name: String, reason: String },

    #[error("unknown generator {0}")]
    UnknownGenerator(String),

    #[error("trajectory too short: length {0}, need at least 2")]
    TrajectoryTooShort(usize),

    #[error("consecutive states ({0}, {1}) are not an edge")]
    InvalidTransition(usize, usize),

    #[error("edges never observed: {0:?}")]
    UnobservedEdge(Vec<(usize, usize)>),

    #[error("state {0} has no observed outgoing transition")]
    UnvisitedState(usize),

    #[error("estimate lies on the boundary (zero counts on {0:?})")]
    BoundaryEstimate(Vec<(usize, usize)>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
