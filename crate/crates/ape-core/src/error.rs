use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the GP, design, and partitioning layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition (dimension mismatch,
    /// non-positive length-scale, empty design, malformed bounds, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The correlation matrix could not be factorized even after jitter
    /// escalation; `jitter` is the last nugget value tried.
    #[error("correlation matrix is ill-conditioned (final jitter tried: {jitter:e})")]
    IllConditioned { jitter: f64 },

    /// An operation needs more observations than the caller supplied
    /// (e.g. leave-one-out cross-validation on fewer than 3 points).
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// No dimension of a region admits a split leaving at least two points
    /// on each side.
    #[error("region {region} admits no valid split")]
    NoValidSplit { region: usize },

    /// The target function returned a non-finite value.
    #[error("function evaluation at {point:?} returned a non-finite value")]
    EvaluationFailed { point: Vec<f64> },

    /// A query point lies outside the domain covered by the partition.
    #[error("point {point:?} is outside the unit hypercube domain")]
    OutOfDomain { point: Vec<f64> },

    /// The hyperparameter search failed to produce a finite objective at
    /// any evaluated candidate.
    #[error("hyperparameter optimization found no finite objective value")]
    OptimizationFailed,

    /// A file had the wrong shape or could not be interpreted.
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand for [`Error::InvalidArgument`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
