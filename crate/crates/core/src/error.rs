//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("pole bound {0} exceeds the supported maximum of 3")]
    PoleBoundTooLarge(usize),
    #[error("series inversion needs a Taylor series, got lowest power {0}")]
    NotTaylor(i32),
    #[error("series known through order {have}, need at least {needed}")]
    InsufficientOrder { needed: i32, have: i32 },
    #[error("coefficient matching failed: inverse has a pole of order greater than {0}")]
    SingularSeries(usize),
    #[error("curvature Taylor data has {have} coefficients, need {needed}")]
    InsufficientRData { needed: usize, have: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("model provides derivatives of the structure functions only up to order {available}, {requested} requested")]
    MissingDerivatives { requested: usize, available: usize },
    #[error("cannot parse model: {0}")]
    Parse(String),
    #[error("unknown builtin model `{0}`")]
    UnknownModel(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("covector has zero horizontal part")]
    TrivialCovector,
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },
    #[error("state has wrong dimension: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("covector is not unit speed: 2H = {0}")]
    NotUnitSpeed(f64),
    #[error("time {t} outside the integrated interval [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComparisonError {
    #[error("no finite conjugate time for (ka, kb) = ({ka}, {kb})")]
    NoConjugateTime { ka: f64, kb: f64 },
    #[error("hypothesis fails: {0}")]
    HypothesisFails(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Umbrella error for operations that cross module boundaries.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
}

impl Error {
    /// Process exit code used by the command-line front end:
    /// 2 for configuration problems, 3 for integration failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Structure(StructureError::Parse(_))
            | Error::Structure(StructureError::UnknownModel(_))
            | Error::Structure(StructureError::InvalidParams(_)) => 2,
            Error::Flow(FlowError::IntegrationFailure { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
