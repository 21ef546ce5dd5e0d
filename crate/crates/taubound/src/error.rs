//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Duplicate or mismatched tensor-factor labels, or incompatible layouts.
    #[error("layout conflict: {0}")]
    LayoutConflict(String),

    /// Empty or invalid factor selection for a partial trace.
    #[error("invalid selection: {0}")]
    InvalidSelection(String),

    /// Operator failed the Hermiticity tolerance.
    #[error("matrix is not Hermitian: {0}")]
    NotHermitian(String),

    /// Matrix failed the density-operator invariants (trace, positivity).
    #[error("invalid density operator: {0}")]
    InvalidState(String),

    /// The support of the first state is not contained in the support of
    /// the second; the pointer-basis commutation assumption failed.
    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    /// Outcome count below two.
    #[error("invalid outcome count: {0}")]
    InvalidOutcomeCount(String),

    /// Nonpositive mode frequency.
    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),

    /// Fock-space truncation leaks more probability than allowed.
    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),

    /// Bath integrand is not integrable at the lower endpoint.
    #[error("divergent bath: {0}")]
    DivergentBath(String),

    /// The requested operator has no finite-dimensional realization.
    #[error("not realizable: {0}")]
    NotRealizable(String),

    /// Requested Hilbert-space dimension exceeds the configured cap.
    #[error("dimension cap exceeded: {0}")]
    TooLarge(String),

    /// Too few samples for a finite-difference estimate.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    /// Incompatible unit tags in operator arithmetic.
    #[error("unit mismatch: {0}")]
    UnitMismatch(String),

    /// Malformed argument outside the more specific categories above.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration file failed schema or unit validation.
    #[error("config error: {0}")]
    Config(String),

    /// LAPACK or numerical backend failure.
    #[error("numerical backend error: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Numerical(e.to_string())
    }
}
