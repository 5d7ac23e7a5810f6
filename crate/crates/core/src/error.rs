use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Points, isometries or measures from different space kinds were mixed.
    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("invalid group table: {0}")]
    InvalidGroup(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A hard size cap (atom count, solver size, enumeration size) was exceeded.
    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("marginal mismatch: source mass {source_mass}, target mass {target_mass}")]
    MarginalMismatch { source_mass: f64, target_mass: f64 },

    #[error("all atoms are below the pruning threshold {0}")]
    AllAtomsPruned(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A constructed object failed its own post-condition check.
    #[error("verification failed: {0}")]
    Verification(String),

    /// Every problem found while validating a configuration.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
