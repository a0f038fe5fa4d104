//! Brute-force references: exact enumeration of the discretized path sum and
//! exact diagonalization against a Fock-truncated discrete reservoir.
//!
//! These live in the shipped library rather than test code so the CLI can
//! expose the same cross-checks to users validating new parameter regimes.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::bath::{BathMode, InfluenceKernel};
use crate::ensembles;
use crate::error::{HmfError, Result};
use crate::imtempo::propagator_matrix;
use crate::model::{eigen_sorted, HermitianOperator, SystemModel};

/// Cap on the number of interior paths `d^(N-1)` of [`exact_path_sum`].
pub const PATH_ENUM_CAP: u128 = 10_000_000;
/// Cap on the total Hilbert dimension of [`exact_hmf_ed`].
pub const ED_DIM_CAP: usize = 20_000;

/// Exact evaluation of the unnormalized discretized path sum by explicit
/// enumeration of all interior index tuples, in the X eigenbasis.
///
/// The result equals the network contraction at negligible truncation and is
/// the defining reference for it.
pub fn exact_path_sum(
    model: &SystemModel,
    kernel: &InfluenceKernel,
    n_steps: usize,
) -> Result<DMatrix<C64>> {
    if n_steps != kernel.n_steps() {
        return Err(HmfError::DimensionMismatch(format!(
            "kernel built for {} steps, asked for {n_steps}",
            kernel.n_steps()
        )));
    }
    if n_steps < 2 {
        return Err(HmfError::Domain(format!(
            "need at least 2 imaginary-time steps, got {n_steps}"
        )));
    }
    let d = model.dim();
    let interior = (d as u128).pow(n_steps as u32 - 1);
    if interior > PATH_ENUM_CAP {
        return Err(HmfError::EnumerationCap {
            size: interior,
            cap: PATH_ENUM_CAP,
        });
    }

    let prop = propagator_matrix(model, kernel.delta());
    let x = model.x_eigenvalues();
    let mut out = DMatrix::<C64>::zeros(d, d);

    // depth-first over (j_0 .. j_{N-1}); influence pairs are accumulated as
    // each index is fixed, the final propagator column closes onto j_N
    let mut path = vec![0usize; n_steps];
    for j0 in 0..d {
        path[0] = j0;
        let w0 = C64::new((kernel.eta(0) * x[j0] * x[j0]).exp(), 0.0);
        recurse(&mut path, 1, w0, &prop, kernel, x, &mut out);
    }
    Ok(out)
}

fn recurse(
    path: &mut Vec<usize>,
    depth: usize,
    weight: C64,
    prop: &DMatrix<C64>,
    kernel: &InfluenceKernel,
    x: &[f64],
    out: &mut DMatrix<C64>,
) {
    let d = prop.nrows();
    let n = path.len();
    if depth == n {
        let j0 = path[0];
        let last = path[n - 1];
        for jn in 0..d {
            out[(j0, jn)] += weight * prop[(last, jn)];
        }
        return;
    }
    for jk in 0..d {
        path[depth] = jk;
        // influence of the new index against every earlier one, plus its
        // self-cell and the propagator from the previous index
        let mut exponent = kernel.eta(0) * x[jk] * x[jk];
        for (kp, &jp) in path.iter().enumerate().take(depth) {
            exponent += kernel.eta(depth - kp) * x[jk] * x[jp];
        }
        let w = weight * prop[(path[depth - 1], jk)] * C64::new(exponent.exp(), 0.0);
        recurse(path, depth + 1, w, prop, kernel, x, out);
    }
}

/// Discrete reservoir with a common Fock cutoff per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBathSpec {
    pub modes: Vec<BathMode>,
    /// Number states 0..=n_max are kept for every mode.
    pub fock_cutoff: usize,
}

impl DiscreteBathSpec {
    pub fn new(modes: Vec<BathMode>, fock_cutoff: usize) -> Result<Self> {
        if fock_cutoff < 2 {
            return Err(HmfError::Domain(format!(
                "fock_cutoff must be at least 2, got {fock_cutoff}"
            )));
        }
        for (i, m) in modes.iter().enumerate() {
            if !(m.nu > 0.0 && m.nu.is_finite()) || !m.g.is_finite() {
                return Err(HmfError::InvalidSpectralDensity(format!(
                    "mode {i}: need finite g and nu > 0"
                )));
            }
        }
        Ok(Self { modes, fock_cutoff })
    }

    fn reservoir_dim(&self, cutoff: usize) -> usize {
        (cutoff + 1).pow(self.modes.len() as u32)
    }
}

/// Exact-diagonalization reference for the mean-force state.
#[derive(Debug, Clone)]
pub struct EdResult {
    pub rho: HermitianOperator,
    /// `log(Tr e^{-βH} / Tr e^{-βH_R})` over the truncated Fock space.
    pub log_z_ratio: f64,
    /// Trace-distance change of `rho` when the Fock cutoff grows by 5.
    pub fock_shift: f64,
    /// Set when `fock_shift` is below 1e-8.
    pub fock_converged: bool,
}

fn lowering(cutoff: usize) -> DMatrix<f64> {
    let n = cutoff + 1;
    DMatrix::from_fn(n, n, |r, c| {
        if c == r + 1 {
            (c as f64).sqrt()
        } else {
            0.0
        }
    })
}

/// Eigen-decomposed thermal data of `H = H_S⊗1 + X⊗Σ g(b+b†) + 1⊗Σ ν b†b`
/// on the truncated Fock space: reduced matrix, log Z_SR and log Z_R.
fn ed_once(model: &SystemModel, bath: &DiscreteBathSpec, beta: f64, cutoff: usize) -> Result<(DMatrix<C64>, f64, f64)> {
    let d = model.dim();
    let dim_r = bath.reservoir_dim(cutoff);
    let total = d * dim_r;
    if total > ED_DIM_CAP {
        return Err(HmfError::HilbertCap {
            dim: total,
            cap: ED_DIM_CAP,
        });
    }

    let n_modes = bath.modes.len();
    let a = lowering(cutoff);
    let x_op = &a + a.transpose(); // b + b†
    let num = DMatrix::<f64>::from_fn(cutoff + 1, cutoff + 1, |r, c| {
        if r == c {
            r as f64
        } else {
            0.0
        }
    });

    // reservoir operators on the joint mode space
    let mut coupling = DMatrix::<f64>::zeros(dim_r, dim_r);
    let mut h_r = DMatrix::<f64>::zeros(dim_r, dim_r);
    for (i, mode) in bath.modes.iter().enumerate() {
        let mut op_x = DMatrix::<f64>::identity(1, 1);
        let mut op_n = DMatrix::<f64>::identity(1, 1);
        for k in 0..n_modes {
            let (next_x, next_n) = if k == i {
                (x_op.clone(), num.clone())
            } else {
                let id = DMatrix::<f64>::identity(cutoff + 1, cutoff + 1);
                (id.clone(), id)
            };
            op_x = op_x.kronecker(&next_x);
            op_n = op_n.kronecker(&next_n);
        }
        coupling += op_x * mode.g;
        h_r += op_n * mode.nu;
    }

    let id_r = DMatrix::<C64>::identity(dim_r, dim_r);
    let to_c = |m: &DMatrix<f64>| m.map(|x| C64::new(x, 0.0));
    let h = model.h_s().matrix().kronecker(&id_r)
        + model.x().matrix().kronecker(&to_c(&coupling))
        + DMatrix::<C64>::identity(d, d).kronecker(&to_c(&h_r));

    let (vals, vecs) = eigen_sorted(&h);
    let e_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = vals.iter().map(|&e| (-beta * (e - e_min)).exp()).collect();
    let log_z_sr = weights.iter().sum::<f64>().ln() - beta * e_min;

    // ρ̃_S[i,j] = Σ_n Σ_k w_k ⟨i,n|v_k⟩⟨v_k|j,n⟩
    let mut rho = DMatrix::<C64>::zeros(d, d);
    for (k, &w) in weights.iter().enumerate() {
        let col = vecs.column(k);
        for i in 0..d {
            for jx in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for n in 0..dim_r {
                    acc += col[i * dim_r + n] * col[jx * dim_r + n].conj();
                }
                rho[(i, jx)] += acc * w;
            }
        }
    }
    // itself unnormalized by e^{-βe_min}; normalize by trace later
    let log_z_r: f64 = bath
        .modes
        .iter()
        .map(|m| {
            // truncated geometric sum Σ_{n<=cutoff} e^{-βνn}
            let q = (-beta * m.nu).exp();
            ((1.0 - q.powi(cutoff as i32 + 1)) / (1.0 - q)).ln()
        })
        .sum();
    Ok((rho, log_z_sr, log_z_r))
}

/// Reduce the global thermal state of system plus truncated reservoir by an
/// exact partial trace; the reference for the network contraction.
pub fn exact_hmf_ed(model: &SystemModel, bath: &DiscreteBathSpec, beta: f64) -> Result<EdResult> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(HmfError::Domain(format!("beta must be > 0, got {beta}")));
    }
    let (raw, log_z_sr, log_z_r) = ed_once(model, bath, beta, bath.fock_cutoff)?;
    let tr: f64 = raw.diagonal().iter().map(|z| z.re).sum();
    let rho_m = raw.map(|z| z / C64::new(tr, 0.0));
    let rho = HermitianOperator::new((&rho_m + rho_m.adjoint()).map(|z| z * C64::new(0.5, 0.0)))?;
    let log_z_ratio = log_z_sr - log_z_r;

    // Fock adequacy: grow the cutoff by 5 and compare, when the cap allows
    let boosted = bath.fock_cutoff + 5;
    let (fock_shift, fock_converged) =
        if model.dim() * bath.reservoir_dim(boosted) <= ED_DIM_CAP {
            let (raw2, _, _) = ed_once(model, bath, beta, boosted)?;
            let tr2: f64 = raw2.diagonal().iter().map(|z| z.re).sum();
            let rho2_m = raw2.map(|z| z / C64::new(tr2, 0.0));
            let rho2 = HermitianOperator::new(
                (&rho2_m + rho2_m.adjoint()).map(|z| z * C64::new(0.5, 0.0)),
            )?;
            let shift = ensembles::trace_distance(&rho, &rho2)?;
            (shift, shift <= 1e-8)
        } else {
            (f64::INFINITY, false)
        };

    Ok(EdResult {
        rho,
        log_z_ratio,
        fock_shift,
        fock_converged,
    })
}
