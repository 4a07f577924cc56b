use thiserror::Error;

use crate::sinkhorn::ScalingResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix order must be at least 1")]
    EmptyMatrix,
    #[error("expected {expected} entries for an order-{n} matrix, got {got}")]
    ShapeMismatch { n: usize, expected: usize, got: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("entry ({row}, {col}) = {value} is negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("order mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("not doubly stochastic: {what} {index} sums to {sum}")]
    NotDoublyStochastic {
        what: &'static str,
        index: usize,
        sum: f64,
    },
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (pivot {pivot:e} at step {step})")]
    NotPositiveDefinite { step: usize, pivot: f64 },
    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,
    #[error("entry ({row}, {col}) is zero; deviance is infinite")]
    ZeroEntry { row: usize, col: usize },

    #[error("matrix is not scalable: {0}")]
    NotScalable(String),
    #[error("Sinkhorn did not reach tolerance within {} sweeps (marginal error {:e})", .0.iterations, .0.final_marginal_error)]
    MaxItersExceeded(Box<ScalingResult>),

    #[error("order {n} exceeds the limit {max}")]
    OrderTooLarge { n: usize, max: usize },
    #[error("order {0} is odd")]
    OddOrder(usize),
    #[error("permanent overflowed the floating range; pre-scale the matrix")]
    OverflowToInfinity,
    #[error("permanent is {0}, its logarithm is undefined")]
    NonPositivePermanent(f64),

    #[error("determinantal approximation undefined: {0}")]
    ApproximationUndefined(Box<Error>),
    #[error("series diverges at term {0}")]
    SeriesDiverges(usize),

    #[error("partition size {k} exceeds the limit {max}")]
    KTooLarge { k: usize, max: usize },
    #[error("partitions of different ground sets: {0} vs {1}")]
    PartitionMismatch(usize, usize),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors that mean the input lies outside the domain of the computation
    /// rather than being malformed.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::ApproximationUndefined(_)
                | Error::NotScalable(_)
                | Error::MaxItersExceeded(_)
                | Error::NotPositiveDefinite { .. }
                | Error::SeriesDiverges(_)
                | Error::OddOrder(_)
                | Error::ZeroEntry { .. }
                | Error::NonPositivePermanent(_)
                | Error::OverflowToInfinity
                | Error::Domain(_)
        )
    }
}
