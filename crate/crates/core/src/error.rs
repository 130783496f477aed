use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at abscissa {at}")]
    NonFiniteProfile { at: f64, value: f64 },
    #[error("damping profile returned invalid value {value} at radius {radius}")]
    InvalidProfileValue { radius: f64, value: f64 },
    #[error("stiffness matrix singular after clamping")]
    SingularStiffness,
    #[error("energy matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),
    #[error("system has no spectral factorization of its generator")]
    MissingEigenData,
    #[error("generator is not skew: {0}")]
    NotSkew(String),
    #[error("damping substep underflow at substep time {last_good_time}")]
    SubstepUnderflow { last_good_time: f64 },
    #[error("Newton iteration failed to converge at step {step}")]
    NewtonFailure { step: usize },
    #[error("norm increased by {increase:e} at step {step}")]
    NormIncrease { step: usize, increase: f64 },
    #[error("resolvent is singular at s = {0}")]
    SingularResolvent(f64),
    #[error("eigenvalue solver failed: {0}")]
    EigenSolver(&'static str),
    #[error("gap hypothesis violated: eigenvalues {0} and {1} coincide")]
    GapViolated(f64, f64),
    #[error("insufficient data for fit: {0}")]
    FitInsufficient(String),
    #[error("no clean power-law remainder (log residual {0})")]
    NoPowerLaw(f64),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}
