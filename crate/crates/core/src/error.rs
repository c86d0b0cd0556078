use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} tasks, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("optimal makespan by enumeration is capped at {cap} tasks, instance has {n}")]
    BruteForceCap { n: usize, cap: usize },
    #[error("invalid time matrix: {0}")]
    InvalidInstance(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("LP solver failed ({status}): {message}")]
    Solver { status: String, message: String },
    #[error("cutting plane stalled after {iterations} iterations with bracket [{t_lower}, {t_upper}]")]
    Stall { iterations: usize, t_lower: f64, t_upper: f64 },
    #[error("cutting plane hit the iteration limit {iterations} with bracket [{t_lower}, {t_upper}]")]
    IterationLimit { iterations: usize, t_lower: f64, t_upper: f64 },
    #[error("self-check failed: {0}")]
    Invariant(String),
    #[error("the lower Frechet bound of {n} margins is not a CDF; the copula construction needs n = 2")]
    CopulaDimension { n: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
