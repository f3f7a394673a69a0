//! Error type shared by every module of the library.

use thiserror::Error;

/// Errors reported by spinlab operations.
///
/// The variants are coarse on purpose: front ends map them onto exit codes
/// (domain errors, budget exhaustion, invalid input) and print the message.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structured input (mixture file, order parameter, configuration) is
    /// malformed or violates its invariants.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The covariance structure is (numerically) singular; this happens for
    /// pure mixtures, where the perturbation flag should be used.
    #[error("pure or near-pure mixture: {0}")]
    Degenerate(String),

    /// Sampling the Hamiltonian would exceed the configured memory cap.
    #[error("memory cap exceeded at degree {degree}: {needed} bytes requested, cap {cap} bytes")]
    MemoryCap {
        /// Degree whose tensor pushes the total over the cap.
        degree: usize,
        /// Cumulative bytes needed up to and including `degree`.
        needed: u64,
        /// Configured cap in bytes.
        cap: u64,
    },

    /// An iterative procedure ran out of budget before meeting its tolerance.
    #[error("budget exhausted: {0}")]
    Budget(String),

    /// A numerical kernel (eigendecomposition, factorisation) failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Reading or writing a file failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Invalid(e.to_string())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
