use thiserror::Error;

use crate::model::State3;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite state")]
    NonFiniteState,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Koper requires k < 0")]
    KoperRequiresNegativeK,

    #[error("degenerate cubic")]
    DegenerateCubic,

    #[error("no branch decomposition")]
    NoBranchDecomposition,

    #[error("degenerate intermediate flow")]
    DegenerateIntermediateFlow,

    #[error("no singular cycle at this level")]
    NoSingularCycle,

    #[error("root bracketing failed: {0}")]
    Bracketing(String),

    #[error("slow flow vanishes on path (near x = {at})")]
    SlowFlowVanishes { at: f64 },

    #[error("no balanced exit")]
    NoBalancedExit,

    #[error("drift integrand pole (near sigma = {at})")]
    DriftIntegrandPole { at: f64 },

    #[error("quadrature failed to reach tolerance (estimate {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("mu_r defined only for remote singularities")]
    NotRemote,

    #[error("integration failed at t = {t}: {reason}")]
    Integration {
        reason: IntegrationFailure,
        t: f64,
        last: State3,
    },

    #[error("Newton iteration diverged (final residual {residual:e})")]
    NewtonDiverged { residual: f64 },

    #[error("transient strip leaves an empty tail")]
    EmptyTail,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationFailure {
    MaxSteps,
    NonFinite,
    StepSizeUnderflow,
}

impl std::fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntegrationFailure::MaxSteps => f.write_str("maximum number of steps exceeded"),
            IntegrationFailure::NonFinite => f.write_str("non-finite state"),
            IntegrationFailure::StepSizeUnderflow => f.write_str("step size underflow"),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
