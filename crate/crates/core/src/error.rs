//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building models or running solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported velocity dimension {0}, expected 2 or 3")]
    UnsupportedDimension(usize),

    #[error("invalid node count {n} for d={dim}: {reason}")]
    InvalidNodeCount { dim: usize, n: usize, reason: String },

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid equilibrium table: {0}")]
    InvalidEquilibrium(String),

    #[error("right-hand side has nonzero velocity mean {mean:.3e}; the leading operator is only invertible on mean-zero data")]
    NonMeanZeroRhs { mean: f64 },

    #[error("leading turning operator is singular or ill-conditioned: {0}")]
    SingularOperator(String),

    #[error("missing spatial gradient for targeted field u_{}", field + 1)]
    MissingGradient { field: usize },

    #[error("field u_{} = {value:.3e} fell below the floor {floor:.1e}; aborting instead of clamping", field + 1)]
    FieldBelowFloor { field: usize, value: f64, floor: f64 },

    #[error("time step {dt:.6e} violates the CFL bound {limit:.6e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("species {} produced density {value:.3e} below tolerance at t = {t:.6}; scheme unstable", species + 1)]
    NegativeDensity { species: usize, value: f64, t: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("inconsistent species data: {0}")]
    SpeciesMismatch(String),

    #[error("saturation denominator {0:.3e} is not positive")]
    SaturationDenominator(f64),

    #[error("parameter `{name}` {constraint}")]
    InvalidParameter { name: String, constraint: String },

    #[error("sweep run at eps = {eps} failed: {source}")]
    SweepRunFailure {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid sweep data: {0}")]
    InvalidSweepData(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a running solver (as opposed to invalid inputs
    /// or failed structural validation). The CLI maps these to exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CflViolation { .. }
                | Error::NegativeDensity { .. }
                | Error::NumericalFailure(_)
                | Error::FieldBelowFloor { .. }
                | Error::SweepRunFailure { .. }
                | Error::SaturationDenominator(_)
        )
    }
}
