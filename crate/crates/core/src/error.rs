use thiserror::Error;

use crate::scheduler::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("length must be positive and finite, got {0}")]
    InvalidLength(f64),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("demand {id} has invalid energy {energy} (must be positive and finite)")]
    InvalidDemand { id: u64, energy: f64 },

    #[error("duplicate demand id {0}")]
    DuplicateDemandId(u64),

    #[error("length {0} is not achievable with the given duration bounds")]
    NotAchievable(f64),

    #[error("{construction} does not apply: {reason}")]
    CaseMismatch {
        construction: &'static str,
        reason: String,
    },

    #[error("policy is infeasible: {0}")]
    Infeasible(ValidationReport),

    #[error("unsupported policy structure: {0}")]
    UnsupportedStructure(String),

    #[error("instance of size {n} exceeds the search cap of {max}")]
    InstanceTooLarge { n: usize, max: usize },

    #[error("invalid search grid: {0}")]
    InvalidGrid(String),

    #[error("width {width} lies outside [{ell}, {r}]")]
    WidthOutOfRange { width: f64, ell: f64, r: f64 },

    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than by a bug or the
    /// environment.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::BoundViolation(_) | Error::Io(_) | Error::Infeasible(_)
        )
    }
}
