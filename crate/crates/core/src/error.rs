use thiserror::Error;

/// Errors raised by the design library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("special-cubic model requires at least 3 ingredients, got {q}")]
    SpecialCubicNeedsThree { q: usize },
    #[error("at least 2 ingredients are required, got {q}")]
    TooFewIngredients { q: usize },
    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("mixture coordinate {index} is invalid with value {value}")]
    InvalidCoordinate { index: usize, value: f64 },
    #[error("mixture proportions sum to {sum}, not 1")]
    NotOnSimplex { sum: f64 },
    #[error("lower bounds sum to {sum}, which must be below 1")]
    BoundsTooLarge { sum: f64 },
    #[error("lower bound {index} is negative ({value})")]
    NegativeBound { index: usize, value: f64 },
    #[error("actual proportion {index} ({value}) is below its lower bound {bound}")]
    BelowBound { index: usize, value: f64, bound: f64 },
    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("Halton dimension {dim} exceeds the {max} available prime bases")]
    TooManyDimensions { dim: usize, max: usize },
    #[error("covariance matrix is not positive semidefinite (pivot {pivot} at column {column})")]
    NotPositiveSemidefinite { column: usize, pivot: f64 },
    #[error("covariance matrix is not symmetric (entry ({row}, {col}) differs by {diff})")]
    NotSymmetric { row: usize, col: usize, diff: f64 },
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("all {starts} starts produced an invalid design criterion")]
    AllStartsFailed { starts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
