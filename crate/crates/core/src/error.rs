//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coefficient list is empty")]
    EmptyCoefficients,
    #[error("leading coefficient t_-n must be strictly positive")]
    ZeroLeadingCoefficient,
    #[error("coefficient at position {index} is negative or not finite")]
    NegativeCoefficient { index: usize },
    #[error("band depth must be at least 1")]
    InvalidBandDepth,
    #[error("tail mass bound must be finite and nonnegative")]
    InvalidTailBound,
    #[error("value kinds are mixed: use either numbers or \"p/q\" strings, not both")]
    MixedValueKinds,
    #[error("argument z = {z} lies outside [0, 1]")]
    OutOfDomain { z: f64 },
    #[error("prefix seed must be strictly positive")]
    NonpositiveSeed,
    #[error("prefix has {got} values but the kernel band depth is {expected}")]
    PrefixLength { expected: usize, got: usize },
    #[error("rational value at index {index} needs {bits} bits, above the limit of {limit}")]
    ArithmeticOverflow { index: usize, bits: u64, limit: u64 },
    #[error("arithmetic mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("horizon K = {k} is smaller than the band depth {n}")]
    HorizonTooShort { k: usize, n: usize },
    #[error("kernel mass is not 1")]
    NotCritical,
    #[error("scale factor must exceed 1")]
    ScaleNotAboveOne,
    #[error("mass is within the truncation bound of 1; the regime cannot be decided")]
    IndeterminateMass,
    #[error("tolerance {tol} is below what double precision can resolve")]
    ToleranceTooSmall { tol: f64 },
    #[error("convexity condition on the n-th root of tau does not hold (status {status})")]
    ConvexityFailed { status: String },
    #[error("operation requires band depth 1, kernel has {n}")]
    WrongBandDepth { n: usize },
    #[error("first moment gamma is not below the band depth")]
    MomentNotSubunit,
    #[error("trace has {len} entries, at least {min} are required")]
    TraceTooShort { len: usize, min: usize },
    #[error("trace contains non-finite values starting at index {index}")]
    NonFiniteTrace { index: usize },
    #[error("denominator tau(z) - z^n vanishes inside (0, 1) near z = {z}")]
    PoleDetected { z: f64 },
    #[error("denominator tau(z) - z^n is numerically zero at z = {z}")]
    PoleAtZ { z: f64 },
    #[error("tail of the series cannot be bounded: {0}")]
    UnboundedTailNotBoundable(String),
    #[error("mean of the distribution is at least 1")]
    MeanAtLeastOne,
    #[error("probability of zero must be positive")]
    ZeroT0,
    #[error("support of mu exceeds {{0, ..., {n}}}")]
    MuSupportExceedsN { n: usize },
    #[error("drift E(nu) - E(mu) is not negative")]
    DriftNotNegative,
    #[error("step distribution has d_0 = 0")]
    ZeroLeadingStep,
    #[error("conditioning event observed {hits} times in {reps} replications")]
    ConditioningEventTooRare { hits: u64, reps: u64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("iteration did not converge: {0}")]
    NotConverged(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code used in CLI error objects.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyCoefficients => "EMPTY_COEFFICIENTS",
            Error::ZeroLeadingCoefficient => "ZERO_LEADING_COEFFICIENT",
            Error::NegativeCoefficient { .. } => "NEGATIVE_COEFFICIENT",
            Error::InvalidBandDepth => "INVALID_BAND_DEPTH",
            Error::InvalidTailBound => "INVALID_TAIL_BOUND",
            Error::MixedValueKinds => "MIXED_VALUE_KINDS",
            Error::OutOfDomain { .. } => "OUT_OF_DOMAIN",
            Error::NonpositiveSeed => "NONPOSITIVE_SEED",
            Error::PrefixLength { .. } => "PREFIX_LENGTH",
            Error::ArithmeticOverflow { .. } => "ARITHMETIC_OVERFLOW",
            Error::ModeMismatch(_) => "MODE_MISMATCH",
            Error::HorizonTooShort { .. } => "HORIZON_TOO_SHORT",
            Error::NotCritical => "NOT_CRITICAL",
            Error::ScaleNotAboveOne => "SCALE_NOT_ABOVE_ONE",
            Error::IndeterminateMass => "INDETERMINATE_MASS",
            Error::ToleranceTooSmall { .. } => "TOLERANCE_TOO_SMALL",
            Error::ConvexityFailed { .. } => "CONVEXITY_FAILED",
            Error::WrongBandDepth { .. } => "WRONG_BAND_DEPTH",
            Error::MomentNotSubunit => "MOMENT_NOT_SUBUNIT",
            Error::TraceTooShort { .. } => "TRACE_TOO_SHORT",
            Error::NonFiniteTrace { .. } => "NON_FINITE_TRACE",
            Error::PoleDetected { .. } => "POLE_DETECTED",
            Error::PoleAtZ { .. } => "POLE_AT_Z",
            Error::UnboundedTailNotBoundable(_) => "UNBOUNDED_TAIL_NOT_BOUNDABLE",
            Error::MeanAtLeastOne => "MEAN_AT_LEAST_ONE",
            Error::ZeroT0 => "ZERO_T0",
            Error::MuSupportExceedsN { .. } => "MU_SUPPORT_EXCEEDS_N",
            Error::DriftNotNegative => "DRIFT_NOT_NEGATIVE",
            Error::ZeroLeadingStep => "ZERO_LEADING_STEP",
            Error::ConditioningEventTooRare { .. } => "CONDITIONING_EVENT_TOO_RARE",
            Error::InvalidDistribution(_) => "INVALID_DISTRIBUTION",
            Error::NotConverged(_) => "NOT_CONVERGED",
            Error::InvalidParameter(_) => "INVALID_PARAMETER",
            Error::Parse(_) => "PARSE_ERROR",
            Error::Io(_) => "IO_ERROR",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
