use thiserror::Error;

/// Errors raised by model construction and the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("CCR matrix is singular (smallest singular value {smallest:.3e})")]
    SingularCcr { smallest: f64 },
    #[error("matrix {0} is not antisymmetric")]
    NotAntisymmetric(&'static str),
    #[error("matrix {0} is not symmetric")]
    NotSymmetric(&'static str),
    #[error("dimension {0} must be even and positive")]
    OddDimension(usize),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("eigenvalue iteration did not converge")]
    EigenFailure,
    #[error("drift matrix is not Hurwitz (spectral abscissa {abscissa:.3e})")]
    NotHurwitz { abscissa: f64 },
    #[error("Lyapunov operator is ill-conditioned (spectral gap {gap:.3e})")]
    IllConditioned { gap: f64 },
    #[error("matrix exponential overflow (norm {norm:.3e})")]
    Overflow { norm: f64 },
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },
    #[error("quadrature did not converge (estimate {estimate:.6e}, error {error:.3e})")]
    NoConvergence { estimate: f64, error: f64 },
    #[error("integrand tail decays slower than 1/x^2 (estimated exponent {exponent:.2})")]
    MissingTailBound { exponent: f64 },
    #[error("cube integration supports at most 4 dimensions, got {0}")]
    DimensionTooLarge(usize),
    #[error("negative time argument {0}")]
    NegativeTime(f64),
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("initial covariance violates the uncertainty relation (min eigenvalue {min_eig:.3e})")]
    InvalidInitialState { min_eig: f64 },
    #[error("time arguments must be nondecreasing")]
    UnsortedTimes,
    #[error("risk parameter must be nonnegative, got {0}")]
    NegativeTheta(f64),
    #[error("order {order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },
    #[error("grid of {points} points exceeds the oracle limit {max}")]
    GridTooLarge { points: usize, max: usize },
    #[error("risk parameter {theta} outside the admissible range [0, {limit})")]
    ThetaOutOfRange { theta: f64, limit: f64 },
    #[error("scale parameter {epsilon} below threshold {threshold}")]
    EpsilonTooSmall { epsilon: f64, threshold: f64 },
    #[error("defective drift matrix and shifted Lyapunov equation is not stable")]
    DefectiveAndUnstableShift,
    #[error("certificate violated: {what} (residual {residual:.3e})")]
    CertificateViolation { what: &'static str, residual: f64 },
    #[error("step construction failed: {0}")]
    StepperConstructionFailure(String),
    #[error("at least {min} paths required, got {got}")]
    InsufficientPaths { got: usize, min: usize },
    #[error("effective sample size {ess:.1} below 50")]
    VarianceBlowup { ess: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
