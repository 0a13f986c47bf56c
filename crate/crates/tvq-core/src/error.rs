//! Error type shared by all modules.

use std::path::PathBuf;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, thiserror::Error)]
pub enum TvqError {
    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The lattice does not satisfy the structural precondition of a move.
    #[error("move rejected: {0}")]
    MoveRejected(String),

    /// A state was used with a lattice it was not built for.
    #[error("lattice version mismatch: state is bound to version {state}, lattice is at version {lattice}")]
    VersionMismatch { state: u64, lattice: u64 },

    /// A desk-scale size guard was exceeded.
    #[error("size guard exceeded: {what} is {actual}, limit is {limit}")]
    SizeGuard { what: &'static str, actual: usize, limit: usize },

    /// The ancillas released by a 3-1 move were not disentangled.
    #[error("residual entanglement {residual:e} on released qubits exceeds {threshold:e}")]
    ResidualEntanglement { residual: f64, threshold: f64 },

    /// A qubit map is not a connectivity-preserving isomorphism.
    #[error("connectivity violation: {0}")]
    ConnectivityViolation(String),

    /// A gate layer or move layer has overlapping supports.
    #[error("support collision: {0}")]
    SupportCollision(String),

    /// A numerical self-check failed.
    #[error("verification failed: {0}")]
    VerificationFailed(String),

    /// File-system failure, annotated with the path involved.
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON document.
    #[error("malformed document: {0}")]
    Format(String),
}

impl From<serde_json::Error> for TvqError {
    fn from(e: serde_json::Error) -> Self {
        TvqError::Format(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, TvqError>;
