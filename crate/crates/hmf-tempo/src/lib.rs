//! Thermal states of small quantum systems strongly coupled to bosonic
//! reservoirs, computed by contracting the imaginary-time influence-functional
//! path integral as a matrix product state.
//!
//! The central quantity is the mean-force Gibbs state: the reduced density
//! matrix obtained by tracing the reservoir out of the global thermal state
//! `exp(-β(H_S + H_SR))`. For a system coupled linearly through a single
//! operator `X` to harmonic modes, the reservoir trace is Gaussian and the
//! remaining sum over system paths in imaginary time forms a triangular
//! tensor network that [`imtempo::compute_hmf`] contracts with controlled
//! singular-value truncation.
//!
//! Alongside the contraction engine the crate ships
//!
//! * the analytic comparison ensembles (system Gibbs state, pointer-projected
//!   Gibbs state) and density-matrix observables in [`ensembles`],
//! * strong-coupling transition rates, relaxation time and steady state from
//!   the polaron (Förster) master equation in [`polaron`],
//! * brute-force references in [`oracle`]: exact path-sum enumeration and
//!   exact diagonalization against a Fock-truncated reservoir,
//! * a configuration-driven CLI (`hmftempo`) in [`cli`] for parameter sweeps,
//!   convergence studies and oracle cross-checks.
//!
//! Units are fixed by ħ = k_B = 1 throughout.
//!
//! ```
//! use hmf_tempo::{bath::SpectralDensity, imtempo, model, tensor::TruncationPolicy};
//!
//! let m = model::build_single_qubit(1.0, 1.0).unwrap();
//! let j = SpectralDensity::ohmic_exp(0.2, 10.0).unwrap();
//! let policy = TruncationPolicy::new(1e-10, None).unwrap();
//! let hmf = imtempo::compute_hmf(&m, &j, 1.0, 64, &policy).unwrap();
//! assert!((hmf.rho.trace_re() - 1.0).abs() < 1e-12);
//! ```

pub mod bath;
pub mod cli;
pub mod ensembles;
pub mod error;
pub mod imtempo;
pub mod model;
pub mod oracle;
pub mod polaron;
pub mod quad;
pub mod tensor;

pub use error::{HmfError, Result};
