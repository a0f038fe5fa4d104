//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HmfError {
    /// SVD iteration failed to converge; carries the matrix shape.
    #[error("svd failed to converge on a {rows}x{cols} matrix")]
    SvdFailure { rows: usize, cols: usize },

    /// A bond of the growing matrix product state would exceed the hard cap.
    #[error("bond {bond} needs dimension {required}, above the cap of {cap}")]
    BondOverflow {
        bond: usize,
        required: usize,
        cap: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid spectral density: {0}")]
    InvalidSpectralDensity(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of panels; carries the best estimate and
    /// the remaining error bound.
    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e}")]
    Quadrature { estimate: f64, error_bound: f64 },

    #[error("matrix is not hermitian: defect {defect:e}")]
    NotHermitian { defect: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error(
        "network contraction failed: {reason} (max bond {max_bond}, \
         accumulated truncation error {truncation_error:e})"
    )]
    ContractionFailure {
        reason: String,
        max_bond: usize,
        truncation_error: f64,
    },

    #[error("expectation value has imaginary residue {defect:e}")]
    ImaginaryExpectation { defect: f64 },

    #[error("path enumeration of {size} interior paths exceeds the cap of {cap}")]
    EnumerationCap { size: u128, cap: u128 },

    #[error("hilbert space dimension {dim} exceeds the cap of {cap}")]
    HilbertCap { dim: usize, cap: usize },

    /// The half-line rate integral failed to fall below the noise floor
    /// before `s_max`; carries the partial value accumulated so far.
    #[error("rate integral not converged by s = {s_max}: partial value {partial:e}")]
    RateIntegral { s_max: f64, partial: f64 },

    #[error("steady state is degenerate: both transition rates vanish")]
    DegenerateSteadyState,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HmfError>;
