use thiserror::Error;

/// Errors produced across urn construction, spectral decomposition,
/// simulation, and moment analysis.
#[derive(Debug, Error)]
pub enum UrnError {
    #[error("invalid urn spec: {0}")]
    InvalidSpec(String),

    /// A balanced-only operation was handed an unbalanced spec.
    #[error("urn is not balanced: worst activity deviation {worst_deviation:.3e} around b-estimate {b_estimate}")]
    NotBalanced { b_estimate: f64, worst_deviation: f64 },

    #[error("tenability violated at step {step}: {reason}")]
    Tenability { step: u64, reason: String },

    #[error("spectral decomposition failed: {0}")]
    Spectral(String),

    /// The leading eigenvalue does not match the balance constant b.
    #[error("leading eigenvalue {lambda1_re}{lambda1_im:+}i does not match balance constant b = {b}")]
    LeadingEigenvalueMismatch {
        lambda1_re: f64,
        lambda1_im: f64,
        b: f64,
    },

    #[error("eigenvalue {lambda} is not simple (algebraic multiplicity {mult})")]
    NotSimple { lambda: f64, mult: usize },

    #[error("trajectory was recorded without martingale increments")]
    MissingIncrements,

    #[error("state-space cap exceeded: {states} states at step {step} (cap {cap})")]
    StateCapExceeded { states: usize, step: u64, cap: usize },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, UrnError>;
