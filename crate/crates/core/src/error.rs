/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid privacy space: {0}")]
    InvalidSpace(String),

    #[error("level {0} is not a member of the privacy space")]
    UnknownLevel(f64),

    #[error("dimension mismatch: expected {expected} users, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{n} users is too large for exact mode (cap {cap}); declare symmetry groups or raise the cap")]
    TooLargeForExact { n: usize, cap: usize },

    #[error("alpha {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),

    #[error("no symmetry groups declared on the utility")]
    MissingSymmetry,

    #[error(
        "symmetry group {group} violated: swapping users {i} and {j} changed the utility by {delta:e}"
    )]
    SymmetryViolation {
        group: usize,
        i: usize,
        j: usize,
        delta: f64,
    },

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("degenerate profile: every user is at the zero level")]
    DegenerateProfile,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("utility fails the monotone/diminishing-returns assumptions: {0}")]
    AssumptionViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;
