use thiserror::Error;

/// Errors produced by the rate models, the optimizer and config loading.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The requested (mean photon number, g2) pair has no valid
    /// two-photon-truncated distribution.
    #[error("non-physical source: {0}")]
    NonPhysicalSource(String),

    #[error("g2 is undefined for a distribution with zero mean photon number")]
    UndefinedG2,

    #[error("dark count probability per gate is {0}, must be below 1")]
    RateTooHigh(f64),

    #[error("probability {0} lies outside [0, 1]")]
    DomainError(f64),

    /// The multi-photon cap swallows every key-basis detection.
    #[error(
        "insufficient block: {detections} key-basis detections against a multi-photon cap of {multi_photon_cap}"
    )]
    InsufficientBlock {
        detections: f64,
        multi_photon_cap: f64,
    },

    #[error("decoy-state bounds are infeasible: {0}")]
    DecoyInfeasible(String),

    #[error("no grid point admits a single-photon advantage at {loss_db} dB")]
    EmptyCurve { loss_db: f64 },

    #[error("no advantage crossover between {min_loss_db} and {max_loss_db} dB: {reason}")]
    NoCrossover {
        min_loss_db: f64,
        max_loss_db: f64,
        reason: String,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error for `{key}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Validation {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
