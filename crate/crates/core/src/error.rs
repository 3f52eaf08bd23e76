use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("empty trajectory or sample set")]
    EmptyTrajectory,

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("partition does not fit on grid: {0}")]
    PartitionOverflow(String),

    #[error("partition of unity residual {residual:e} exceeds tolerance {tolerance:e}")]
    PartitionResidual { residual: f64, tolerance: f64 },

    #[error("box index {0:?} is outside the retained range")]
    BoxOutOfRange(Vec<i64>),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("nonlinearity kind mismatch: expected {0}")]
    KindMismatch(&'static str),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("exponential nonlinearity overflow: rho*|u|^2 = {0} exceeds 700")]
    Overflow(f64),

    #[error("Picard iteration is not contracting (theta = {:.4})", .0.contraction_factor)]
    NonContraction(Box<SolveReport>),

    #[error("Picard iteration did not reach tolerance within {} iterations", .0.iterations)]
    MaxIterations(Box<SolveReport>),

    #[error("integrand tail is not negligible: {0}")]
    TailNotNegligible(String),

    #[error("split-step size too large: {0}")]
    StepTooLarge(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error is a rejected theorem hypothesis rather than a
    /// numerical failure.
    pub fn is_hypothesis(&self) -> bool {
        matches!(self, Error::Hypothesis(_))
    }
}
