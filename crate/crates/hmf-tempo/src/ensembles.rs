//! Analytic comparison ensembles and density-matrix observables.
//!
//! Three ensembles recur throughout: the mean-force Gibbs state from the
//! network contraction, the bare system Gibbs state, and the projected Gibbs
//! state built from the block-projection of `H_S` onto the coupling
//! eigenspaces (its strong-coupling limit). For the single qubit both
//! comparison ensembles have closed-form pointer populations, kept here next
//! to their matrix-trace counterparts.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{HmfError, Result};
use crate::model::{eigen_sorted, sigma_x, HermitianOperator, SystemModel};

/// Which thermal ensemble a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    System,
    Projected,
    Hmf,
}

impl std::fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::System => write!(f, "system"),
            Self::Projected => write!(f, "projected"),
            Self::Hmf => write!(f, "hmf"),
        }
    }
}

/// Normalized Gibbs state `e^{-βH}/Tr e^{-βH}`, stable for large `β`.
pub fn gibbs(h: &HermitianOperator, beta: f64) -> Result<HermitianOperator> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(HmfError::Domain(format!("beta must be > 0, got {beta}")));
    }
    let (vals, vecs) = h.eigen_sorted();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = vals.iter().map(|&v| (-beta * (v - min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let d = h.dim();
    let lam = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::new(weights[i] / z, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    HermitianOperator::new(&vecs * lam * vecs.adjoint())
}

/// Block-projection of `H_S` onto the eigenspaces of the coupling operator:
/// `Σ_λ P_λ H_S P_λ` over distinct eigenvalues λ.
///
/// Degenerate eigenvalues use the full eigenspace projector, which makes the
/// result independent of the basis chosen inside the degenerate block.
pub fn project(model: &SystemModel) -> Result<HermitianOperator> {
    let d = model.dim();
    let vals = model.x_eigenvalues();
    let v = model.x_eigenvectors();
    let scale = vals.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    let tol = 1e-8 * scale;

    let mut out = DMatrix::<C64>::zeros(d, d);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (vals[end] - vals[start]).abs() <= tol {
            end += 1;
        }
        let block = v.columns(start, end - start);
        let p = &block * block.adjoint();
        out += &p * model.h_s().matrix() * &p;
        start = end;
    }
    HermitianOperator::new(out)
}

/// Pointer population of the bare system Gibbs state:
/// `⟨τ^z⟩ = -cosθ tanh(βω_q/2)`.
pub fn tauz_system(omega_q: f64, theta: f64, beta: f64) -> f64 {
    -theta.cos() * (0.5 * beta * omega_q).tanh()
}

/// Pointer population of the projected Gibbs state:
/// `⟨τ^z⟩ = -tanh(βω_q cosθ/2)`.
pub fn tauz_projected(omega_q: f64, theta: f64, beta: f64) -> f64 {
    -(0.5 * beta * omega_q * theta.cos()).tanh()
}

/// Real expectation value `Re Tr(ρ O)`; errors if the imaginary residue
/// exceeds 1e-10 (relative to the value scale).
pub fn expectation(rho: &HermitianOperator, o: &HermitianOperator) -> Result<f64> {
    if rho.dim() != o.dim() {
        return Err(HmfError::DimensionMismatch(format!(
            "rho is {}-dimensional, observable is {}-dimensional",
            rho.dim(),
            o.dim()
        )));
    }
    let prod = rho.matrix() * o.matrix();
    let tr: C64 = prod.diagonal().iter().sum();
    let defect = tr.im.abs();
    if defect > 1e-10 * tr.re.abs().max(1.0) {
        return Err(HmfError::ImaginaryExpectation { defect });
    }
    Ok(tr.re)
}

/// Partial transpose of a two-qubit density matrix over qubit `partition`
/// (0 = first, 1 = second).
pub fn partial_transpose(rho: &HermitianOperator, partition: usize) -> Result<DMatrix<C64>> {
    if rho.dim() != 4 {
        return Err(HmfError::DimensionMismatch(format!(
            "partial transpose needs d = 4, got {}",
            rho.dim()
        )));
    }
    if partition > 1 {
        return Err(HmfError::Domain(format!(
            "partition must be 0 or 1, got {partition}"
        )));
    }
    let m = rho.matrix();
    let idx = |a: usize, b: usize| 2 * a + b;
    let mut out = DMatrix::<C64>::zeros(4, 4);
    for ia in 0..2 {
        for ib in 0..2 {
            for ja in 0..2 {
                for jb in 0..2 {
                    let (r, c) = (idx(ia, ib), idx(ja, jb));
                    let (rs, cs) = if partition == 0 {
                        (idx(ja, ib), idx(ia, jb))
                    } else {
                        (idx(ia, jb), idx(ja, ib))
                    };
                    out[(r, c)] = m[(rs, cs)];
                }
            }
        }
    }
    Ok(out)
}

/// Entanglement negativity: modulus of the sum of negative eigenvalues of
/// the partial transpose. Eigenvalues above `-1e-12` count as zero, so
/// separable states with roundoff-negative spectra report exactly 0.
pub fn negativity(rho: &HermitianOperator, partition: usize) -> Result<f64> {
    let pt = partial_transpose(rho, partition)?;
    let defect = (&pt - pt.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if defect > 1e-9 {
        return Err(HmfError::NotHermitian { defect });
    }
    let sym = (&pt + pt.adjoint()).map(|z| z * C64::new(0.5, 0.0));
    let (vals, _) = eigen_sorted(&sym);
    Ok(vals.iter().filter(|&&v| v < -1e-12).map(|v| -v).sum())
}

/// Two-qubit cross coherence `⟨σ^x_a σ^x_b⟩`.
pub fn cross_coherence(rho: &HermitianOperator) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(HmfError::DimensionMismatch(format!(
            "cross coherence needs d = 4, got {}",
            rho.dim()
        )));
    }
    let o = HermitianOperator::new(sigma_x().kronecker(&sigma_x()))?;
    expectation(rho, &o)
}

/// Trace distance `½ Σ |eig(ρ - σ)|`.
pub fn trace_distance(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(HmfError::DimensionMismatch(format!(
            "trace distance of {}- and {}-dimensional states",
            a.dim(),
            b.dim()
        )));
    }
    let diff = a.matrix() - b.matrix();
    let (vals, _) = eigen_sorted(&diff);
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}
