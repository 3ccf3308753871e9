use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the physics, simulation and fitting routines.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// An input violates a documented precondition.
    InvalidParameter(String),
    /// The requested quantity diverges at this operating point.
    Singularity(String),
    /// Operator or state dimensions do not agree.
    DimensionMismatch { expected: usize, found: usize },
    /// The integrator could not make progress.
    NumericalFailure { time: f64, reason: String },
    /// The Liouvillian has more than one stationary state.
    AmbiguousSteadyState { null_dimension: usize },
    /// A curve fit did not produce a usable estimate.
    Fit(FitFailure),
}

/// Why a curve fit was rejected.
#[derive(Clone, Debug, PartialEq)]
pub enum FitFailure {
    TooFewSamples {
        required: usize,
        found: usize,
    },
    /// The data do not constrain a decay within the sampled window.
    NonIdentifiable(String),
    /// The periodogram has no peak above the noise floor.
    NoSpectralPeak,
    /// Iteration cap reached without meeting the convergence criteria.
    NotConverged {
        iterations: usize,
        residual_rms: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Singularity(msg) => write!(f, "singular operating point: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NumericalFailure { time, reason } => {
                write!(f, "numerical failure at t = {time:e} s: {reason}")
            }
            Error::AmbiguousSteadyState { null_dimension } => write!(
                f,
                "steady state is not unique (null space dimension {null_dimension})"
            ),
            Error::Fit(failure) => write!(f, "fit failed: {failure}"),
        }
    }
}

impl fmt::Display for FitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitFailure::TooFewSamples { required, found } => {
                write!(f, "need at least {required} samples, got {found}")
            }
            FitFailure::NonIdentifiable(msg) => write!(f, "decay is not identifiable: {msg}"),
            FitFailure::NoSpectralPeak => write!(f, "no spectral peak above the noise floor"),
            FitFailure::NotConverged {
                iterations,
                residual_rms,
            } => write!(
                f,
                "no convergence after {iterations} iterations (rms residual {residual_rms:e})"
            ),
        }
    }
}

impl core::error::Error for Error {}
impl core::error::Error for FitFailure {}

impl From<FitFailure> for Error {
    fn from(value: FitFailure) -> Self {
        Error::Fit(value)
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
