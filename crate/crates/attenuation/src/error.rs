use crate::inference::Method;

/// Everything that can go wrong in this crate.
///
/// Domain errors carry the offending value so callers can produce a usable
/// diagnostic without re-deriving context.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("correlation must lie strictly inside (-1, 1), got {value}")]
    CorrelationOutOfRange { value: f64 },

    #[error("reliability must lie in {expected}, got {value}")]
    ReliabilityOutOfRange { value: f64, expected: &'static str },

    #[error("sample size must be at least {min}, got {got}")]
    SampleSizeTooSmall { min: u32, got: u32 },

    #[error("testlet count must be at least 2, got {got}")]
    TestletCountTooSmall { got: u32 },

    #[error("method cronbach requires testlet counts (k2, k3)")]
    MissingTestletCounts,

    #[error("variance must be positive, got {value}")]
    NonpositiveVariance { value: f64 },

    #[error("chi-squared argument must be nonnegative, got {value}")]
    NegativeChiSquaredArgument { value: f64 },

    #[error("probability must lie in {expected}, got {value}")]
    ProbabilityOutOfRange { value: f64, expected: &'static str },

    #[error("rho must lie in [-1,1], got {value}")]
    RhoOutOfRange { value: f64 },

    #[error("minimization did not converge for method {method} at rho0 = {rho0}")]
    NonConvergence { method: Method, rho0: f64 },

    #[error("method {method} has no nuisance minimization program")]
    NoNuisanceProgram { method: Method },

    #[error("grid must have at least {min} points, got {got}")]
    GridTooSmall { min: usize, got: usize },

    #[error(
        "inter-testlet correlation {c} implied by reliability {r} with {k} testlets \
         falls outside (0, 1)"
    )]
    CompoundSymmetryOutOfRange { r: f64, k: u32, c: f64 },

    #[error("degenerate sample: covariance grand sum is not positive")]
    DegenerateSample,

    #[error("invalid simulation config: {message}")]
    InvalidConfig { message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
