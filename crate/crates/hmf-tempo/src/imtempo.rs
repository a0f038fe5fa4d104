//! Imaginary-time contraction engine: builds the triangular influence
//! network from an [`InfluenceKernel`] and a [`SystemModel`] and contracts it
//! row by row into the unnormalized reduced density matrix, then normalizes.
//!
//! The boundary index is handled by looping the `d` values of the fixed left
//! index and running one MPS contraction each; the contractions are
//! independent and run in parallel, but are always combined in index order so
//! the result is bit-reproducible. No memory cutoff exists in imaginary time
//! (the kernel wraps around the thermal circle), so every row couples to all
//! previous sites through the precomputed `η_m`.
//!
//! The first-order split breaks exact Hermiticity of the raw matrix at
//! finite step count; the defect is measured, reported, and removed by
//! symmetrizing before normalization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bath::{influence_kernel, InfluenceKernel, SpectralDensity};
use crate::error::{HmfError, Result};
use crate::model::{eigen_sorted, HermitianOperator, SystemModel};
use crate::tensor::{
    mps_apply_growth_row, DenseTensor, GrowthRow, MatrixProductState, TruncationPolicy,
};

/// Hard cap on `N·d`, the linear size of the triangular network.
pub const NETWORK_HARD_CAP: usize = 1 << 16;

/// Negative eigenvalues are clipped to zero after normalization; roundoff
/// lives above -1e-10, anything below `-EIG_INVALID_FLOOR` is a genuine
/// truncation failure and flags the result invalid.
const EIG_INVALID_FLOOR: f64 = 1e-6;

/// Matrix elements of `e^{-Δ H_S}` in the X eigenbasis, from the exact
/// eigen-decomposition of `H_S`.
pub fn propagator(model: &SystemModel, delta: f64) -> Result<DenseTensor> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(HmfError::Domain(format!("delta must be > 0, got {delta}")));
    }
    Ok(DenseTensor::from_matrix(&propagator_matrix(model, delta)))
}

pub(crate) fn propagator_matrix(model: &SystemModel, delta: f64) -> DMatrix<C64> {
    let (vals, vecs) = eigen_sorted(model.h_s().matrix());
    let d = model.dim();
    let exp_diag = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::new((-delta * vals[i]).exp(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let exp_h = &vecs * exp_diag * vecs.adjoint();
    let v = model.x_eigenvectors();
    v.adjoint() * exp_h * v
}

/// Contraction diagnostics of one mean-force computation.
#[derive(Debug, Clone, Copy)]
pub struct HmfDiagnostics {
    /// Largest retained bond dimension across all rows and boundary sectors.
    pub max_bond: usize,
    /// Total discarded singular-value weight, summed over every sweep.
    pub truncation_error_accum: f64,
    /// Relative Frobenius defect of the raw matrix against its adjoint.
    pub hermiticity_defect: f64,
    /// Most negative eigenvalue of the normalized state before clipping.
    pub min_eigenvalue: f64,
}

/// Normalized mean-force Gibbs state with the partition-function ratio and
/// contraction diagnostics.
#[derive(Debug, Clone)]
pub struct HmfResult {
    /// Unit-trace PSD density matrix in the original basis of `H_S`.
    pub rho: HermitianOperator,
    /// `log(Z_SR / Z_R)`: log-trace of the unnormalized contraction.
    pub log_z_ratio: f64,
    pub diagnostics: HmfDiagnostics,
    /// Cleared when the positivity violation exceeds the tolerated floor.
    pub valid: bool,
}

/// Raw contraction output: the unnormalized, unsymmetrized matrix in the X
/// eigenbasis, scaled so that `rho_tilde = matrix * exp(log_scale)`.
#[derive(Debug, Clone)]
pub struct RawContraction {
    pub matrix: DMatrix<C64>,
    pub log_scale: f64,
    pub max_bond: usize,
    pub truncation_error_accum: f64,
}

/// Build the growth row for step `k` at fixed boundary value `j0`.
///
/// `weights[m]` must hold the influence factor matrix
/// `exp(η_m X_j X_a)` indexed `(j, a)`; `prop` is the imaginary-time
/// propagator in the X eigenbasis.
pub fn build_growth_row(
    k: usize,
    j0: usize,
    weights: &[DMatrix<C64>],
    prop: &DMatrix<C64>,
) -> Result<GrowthRow> {
    let d = prop.nrows();
    let self_w = &weights[0];
    let left_terminal = DVector::from_fn(d, |a, _| weights[k][(j0, a)]);
    let pass_through: Vec<DMatrix<C64>> = (1..k).map(|kp| weights[k - kp].clone()).collect();
    let new_site = if k == 1 {
        DMatrix::from_fn(1, d, |_, a| prop[(j0, a)] * self_w[(a, a)])
    } else {
        DMatrix::from_fn(d, d, |j, a| prop[(j, a)] * self_w[(a, a)])
    };
    GrowthRow::new(k, left_terminal, pass_through, new_site)
}

fn influence_weights(kernel: &InfluenceKernel, x_vals: &[f64]) -> Vec<DMatrix<C64>> {
    let d = x_vals.len();
    (0..kernel.n_steps())
        .map(|m| {
            DMatrix::from_fn(d, d, |j, a| {
                C64::new((kernel.eta(m) * x_vals[j] * x_vals[a]).exp(), 0.0)
            })
        })
        .collect()
}

/// Contract the full network at fixed boundary index `j0`, returning one row
/// of the unnormalized matrix together with its log scale and sweep stats.
fn contract_boundary_sector(
    j0: usize,
    n_steps: usize,
    weights: &[DMatrix<C64>],
    prop: &DMatrix<C64>,
    kernel: &InfluenceKernel,
    x_vals: &[f64],
    policy: &TruncationPolicy,
) -> Result<(Vec<C64>, f64, usize, f64)> {
    let d = prop.nrows();
    // self-influence of the boundary cell
    let mut log_scale = kernel.eta(0) * x_vals[j0] * x_vals[j0];
    let mut state = MatrixProductState::empty(d);
    let mut max_bond = 1;
    for k in 1..n_steps {
        let row = build_growth_row(k, j0, weights, prop)?;
        state = mps_apply_growth_row(&state, &row, policy)?;
        log_scale += state.rebalance();
        max_bond = max_bond.max(state.max_bond_dim());
    }
    // terminal sum over the free right index: all-ones terminals except the
    // last site, which takes the final propagator column
    let ones = DVector::from_element(d, C64::new(1.0, 0.0));
    let mut row_vals = Vec::with_capacity(d);
    for j_n in 0..d {
        let mut terminals: Vec<DVector<C64>> = vec![ones.clone(); state.len()];
        let last = terminals
            .last_mut()
            .expect("network with N >= 2 has at least one interior site");
        *last = DVector::from_fn(d, |p, _| prop[(p, j_n)]);
        row_vals.push(state.contract_full(&terminals)?);
    }
    Ok((row_vals, log_scale, max_bond, state.truncation_error_accum()))
}

/// Unnormalized contraction of the full path sum in the X eigenbasis.
pub fn compute_rho_tilde(
    model: &SystemModel,
    kernel: &InfluenceKernel,
    policy: &TruncationPolicy,
) -> Result<RawContraction> {
    let d = model.dim();
    let n_steps = kernel.n_steps();
    if n_steps < 2 {
        return Err(HmfError::Domain(format!(
            "need at least 2 imaginary-time steps, got {n_steps}"
        )));
    }
    if n_steps.saturating_mul(d) > NETWORK_HARD_CAP {
        return Err(HmfError::HilbertCap {
            dim: n_steps * d,
            cap: NETWORK_HARD_CAP,
        });
    }
    let prop = propagator_matrix(model, kernel.delta());
    let weights = influence_weights(kernel, model.x_eigenvalues());

    let sectors: Vec<Result<(Vec<C64>, f64, usize, f64)>> = (0..d)
        .into_par_iter()
        .map(|j0| {
            contract_boundary_sector(
                j0,
                n_steps,
                &weights,
                &prop,
                kernel,
                model.x_eigenvalues(),
                policy,
            )
        })
        .collect();

    let mut rows = Vec::with_capacity(d);
    let mut max_bond = 1;
    let mut trunc = 0.0;
    for sector in sectors {
        let (vals, log_scale, bond, err) = sector?;
        max_bond = max_bond.max(bond);
        trunc += err;
        rows.push((vals, log_scale));
    }

    let log_ref = rows
        .iter()
        .map(|r| r.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let matrix = DMatrix::from_fn(d, d, |j0, jn| {
        let (vals, ls) = &rows[j0];
        vals[jn] * (ls - log_ref).exp()
    });
    Ok(RawContraction {
        matrix,
        log_scale: log_ref,
        max_bond,
        truncation_error_accum: trunc,
    })
}

/// Compute the mean-force Gibbs state of `model` against reservoir `j` at
/// inverse temperature `beta`, using `n_steps` imaginary-time slices.
///
/// The raw contraction is symmetrized, normalized by its trace (which is the
/// ratio `Z_SR/Z_R`), floored against roundoff-negative eigenvalues, and
/// rotated back from the X eigenbasis to the original basis.
pub fn compute_hmf(
    model: &SystemModel,
    j: &SpectralDensity,
    beta: f64,
    n_steps: usize,
    policy: &TruncationPolicy,
) -> Result<HmfResult> {
    let kernel = influence_kernel(j, beta, n_steps)?;
    compute_hmf_with_kernel(model, &kernel, policy)
}

/// Same as [`compute_hmf`] but reusing a prebuilt kernel.
pub fn compute_hmf_with_kernel(
    model: &SystemModel,
    kernel: &InfluenceKernel,
    policy: &TruncationPolicy,
) -> Result<HmfResult> {
    let raw = compute_rho_tilde(model, kernel, policy)?;
    let d = model.dim();

    let fail = |reason: String| HmfError::ContractionFailure {
        reason,
        max_bond: raw.max_bond,
        truncation_error: raw.truncation_error_accum,
    };

    let trace: C64 = raw.matrix.diagonal().iter().sum();
    if !trace.re.is_finite() || trace.re <= 0.0 {
        return Err(fail(format!("non-positive trace {}", trace.re)));
    }
    if trace.im.abs() > 1e-8 * trace.re {
        return Err(fail(format!(
            "trace has imaginary residue {:e}",
            trace.im
        )));
    }
    let log_z_ratio = trace.re.ln() + raw.log_scale;

    let norm: f64 = raw.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let defect_num: f64 = (&raw.matrix - raw.matrix.adjoint())
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let hermiticity_defect = if norm > 0.0 { defect_num / norm } else { 0.0 };

    let sym = (&raw.matrix + raw.matrix.adjoint()).map(|z| z / C64::new(2.0 * trace.re, 0.0));

    // positivity floor: clip roundoff-negative eigenvalues, flag real ones
    let (vals, vecs) = eigen_sorted(&sym);
    let min_eigenvalue = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let valid = min_eigenvalue >= -EIG_INVALID_FLOOR;
    let clipped: Vec<f64> = vals.iter().map(|&v| if v < 0.0 { 0.0 } else { v }).collect();
    let z: f64 = clipped.iter().sum();
    if z <= 0.0 {
        return Err(fail("all eigenvalues clipped to zero".into()));
    }
    let lam = DMatrix::from_fn(d, d, |i, jx| {
        if i == jx {
            C64::new(clipped[i] / z, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let rho_x = &vecs * lam * vecs.adjoint();

    let v = model.x_eigenvectors();
    let rho_orig = v * rho_x * v.adjoint();
    // numerical hermitization only; the symmetrized matrix is self-adjoint
    let rho_h = (&rho_orig + rho_orig.adjoint()).map(|zz| zz * C64::new(0.5, 0.0));
    let rho = HermitianOperator::new(rho_h)?;

    Ok(HmfResult {
        rho,
        log_z_ratio,
        diagnostics: HmfDiagnostics {
            max_bond: raw.max_bond,
            truncation_error_accum: raw.truncation_error_accum,
            hermiticity_defect,
            min_eigenvalue,
        },
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathMode;
    use crate::ensembles;
    use crate::model::{build_single_qubit, build_two_qubit, pointer_observables};
    use approx::assert_relative_eq;

    fn policy(eps: f64) -> TruncationPolicy {
        TruncationPolicy::new(eps, None).unwrap()
    }

    #[test]
    fn propagator_of_zero_hamiltonian_is_identity() {
        // θ = π/2 makes H_S traceless off-diagonal; fake a zero H by scaling
        let m = build_single_qubit(1e-300, 0.3).unwrap();
        let p = propagator(&m, 0.5).unwrap();
        let mat = p.to_matrix().unwrap();
        assert_relative_eq!(mat[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(mat[(1, 1)].re, 1.0, epsilon = 1e-12);
        assert!(mat[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn propagator_commuting_case_is_diagonal() {
        let m = build_single_qubit(1.0, 0.0).unwrap();
        let p = propagator(&m, 0.25).unwrap().to_matrix().unwrap();
        assert_relative_eq!(p[(0, 0)].re, (-0.125f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(p[(1, 1)].re, (0.125f64).exp(), max_relative = 1e-12);
        assert!(p[(0, 1)].norm() < 1e-14);
        assert!(p[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn propagator_matches_series_expansion() {
        // independent route: scaled-and-squared Taylor series of e^{-ΔH}
        let m = build_single_qubit(1.3, 0.9).unwrap();
        let delta = 0.37;
        let h = m.x_eigenvectors().adjoint() * m.h_s().matrix() * m.x_eigenvectors();
        let mut arg = h.map(|z| z * C64::new(-delta / 1024.0, 0.0));
        let id = DMatrix::<C64>::identity(2, 2);
        let mut series = id.clone();
        let mut term = id.clone();
        for k in 1..20 {
            term = (&term * &arg).map(|z| z / C64::new(k as f64, 0.0));
            series += &term;
        }
        for _ in 0..10 {
            series = &series * &series;
        }
        arg = propagator(&m, delta).unwrap().to_matrix().unwrap();
        let defect = (&series - &arg).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(defect < 1e-12, "defect {defect:e}");
        // real-symmetric H_S in the X basis gives a self-adjoint propagator
        let herm = (&arg - arg.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(herm < 1e-13);
    }

    #[test]
    fn commuting_limit_is_exact_for_any_coupling() {
        // θ = 0: the displaced-reservoir factors cancel between pointer
        // sectors, so the state equals the bare Gibbs state at any α and N
        let m = build_single_qubit(1.0, 0.0).unwrap();
        let j = SpectralDensity::ohmic_exp(0.7, 10.0).unwrap();
        let beta = 1.0;
        let hmf = compute_hmf(&m, &j, beta, 8, &policy(1e-14)).unwrap();
        let (tz, _) = pointer_observables(&m).unwrap();
        let got = ensembles::expectation(&hmf.rho, &tz).unwrap();
        assert_relative_eq!(got, -(0.5f64).tanh(), epsilon = 1e-10);
        assert!(hmf.valid);
    }

    #[test]
    fn weak_coupling_approaches_system_gibbs() {
        let m = build_single_qubit(1.0, 1.0).unwrap();
        let j = SpectralDensity::ohmic_exp(1e-4, 10.0).unwrap();
        let hmf = compute_hmf(&m, &j, 1.0, 64, &policy(1e-12)).unwrap();
        let gibbs = ensembles::gibbs(m.h_s(), 1.0).unwrap();
        let dist = ensembles::trace_distance(&hmf.rho, &gibbs).unwrap();
        assert!(dist < 1e-3, "trace distance {dist:e}");
    }

    #[test]
    fn discrete_mode_runs_and_normalizes() {
        let m = build_single_qubit(1.0, 1.0).unwrap();
        let j = SpectralDensity::discrete(vec![BathMode { g: 0.3, nu: 1.0 }]).unwrap();
        let hmf = compute_hmf(&m, &j, 1.0, 32, &policy(1e-13)).unwrap();
        assert_relative_eq!(hmf.rho.trace_re(), 1.0, epsilon = 1e-12);
        assert!(hmf.diagnostics.hermiticity_defect < 0.2);
        assert!(hmf.diagnostics.min_eigenvalue > -1e-10);
    }

    #[test]
    fn hermiticity_defect_shrinks_with_n() {
        let m = build_single_qubit(1.0, 1.0).unwrap();
        let j = SpectralDensity::ohmic_exp(0.2, 10.0).unwrap();
        let d1 = compute_hmf(&m, &j, 1.0, 16, &policy(1e-13))
            .unwrap()
            .diagnostics
            .hermiticity_defect;
        let d2 = compute_hmf(&m, &j, 1.0, 64, &policy(1e-13))
            .unwrap()
            .diagnostics
            .hermiticity_defect;
        assert!(d2 < d1, "defect should fall with finer steps: {d1:e} vs {d2:e}");
        assert!(d1 > 0.0);
    }

    #[test]
    fn basis_choice_in_degenerate_sector_is_irrelevant() {
        let m = build_two_qubit(2.0).unwrap();
        let j = SpectralDensity::ohmic_exp(0.1, 10.0).unwrap();
        let kernel = influence_kernel(&j, 1.0, 24).unwrap();
        let pol = policy(1e-12);
        let base = compute_hmf_with_kernel(&m, &kernel, &pol).unwrap();

        // rotate inside the doubly degenerate X = 0 eigenspace and re-phase
        let mut v = m.x_eigenvectors().clone();
        let c1 = v.column(1).into_owned();
        let c2 = v.column(2).into_owned();
        let ang = 0.613f64;
        let ph = C64::new(0.0, 0.77).exp();
        let n1 = (&c1 * C64::new(ang.cos(), 0.0) + &c2 * C64::new(ang.sin(), 0.0)) * ph;
        let n2 = &c1 * C64::new(-ang.sin(), 0.0) + &c2 * C64::new(ang.cos(), 0.0);
        v.set_column(1, &n2);
        v.set_column(2, &n1);
        let vals = m.x_eigenvalues().to_vec();
        let rotated = m.clone().with_eigenbasis(vals, v).unwrap();
        let alt = compute_hmf_with_kernel(&rotated, &kernel, &pol).unwrap();

        let dist = ensembles::trace_distance(&base.rho, &alt.rho).unwrap();
        assert!(dist < 1e-10, "trace distance {dist:e}");
        assert_relative_eq!(base.log_z_ratio, alt.log_z_ratio, max_relative = 1e-10);
    }

    #[test]
    fn rejects_undersized_network() {
        let m = build_single_qubit(1.0, 1.0).unwrap();
        let j = SpectralDensity::ohmic_exp(0.2, 10.0).unwrap();
        assert!(compute_hmf(&m, &j, 1.0, 1, &policy(1e-12)).is_err());
    }
}
