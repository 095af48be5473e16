//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the Pauli algebra, channel and estimator layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("qubit count {0} exceeds the supported maximum of {1}")]
    QubitLimit(usize, usize),

    #[error("invalid Pauli string {0:?}: only characters I, X, Y, Z are allowed")]
    ParsePauli(String),

    #[error("probability {0} outside the valid range")]
    InvalidProbability(f64),

    #[error("channel is singular: PTM eigenvalue {value:.3e} for basis string {string}")]
    SingularChannel { string: String, value: f64 },

    #[error("channel weights sum to {0}, expected 1")]
    NotTracePreserving(f64),

    #[error("channel has no support")]
    EmptyChannel,

    #[error("operator set is not a subgroup of the reference group")]
    NotSubgroup,

    #[error("expected a uniform group-supported channel, found irregular weights")]
    NotGroupChannel,

    #[error("symmetry list is invalid: {0}")]
    InvalidSymmetries(String),

    #[error("mismatched list lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("observable does not commute with the verified symmetry")]
    NonCommutingObservable,

    #[error("projector product has a residual imaginary coefficient {0:.3e}")]
    NonRealCoefficient(f64),

    #[error("verification branch has vanishing probability {0:.3e}")]
    EmptyBranch(f64),

    #[error("extrapolation inputs are not exponential-decay compatible (signs differ or zero)")]
    NonExponentialData,

    #[error("hyperbolic extrapolation radicand is negative ({0:.3e}); probe more error rates")]
    NonHyperbolicDecay(f64),

    #[error("fit did not converge after {0} restarts")]
    FitDiverged(usize),

    #[error("not enough data points: got {got}, need at least {need}")]
    InsufficientPoints { got: usize, need: usize },

    #[error("gate parameter count mismatch: got {got}, expected {expected}")]
    ParamCountMismatch { got: usize, expected: usize },

    #[error("noise sites are not uniform in error probability")]
    NonUniformSites,

    #[error("unknown channel preset {0:?}")]
    UnknownPreset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
