//! System models: Hermitian operators, the coupling-operator eigenbasis, and
//! the concrete single-qubit and two-qubit builders.
//!
//! Every model stores the eigen-decomposition of its coupling operator `X`,
//! ordered descending by eigenvalue with a fixed phase convention (first
//! non-negligible eigenvector component rotated real positive, ties between
//! degenerate eigenvalues broken lexicographically). The path integral only
//! ever sees the eigenvalues `X_j`, so any orthonormal choice inside a
//! degenerate eigenspace leaves the physics unchanged; the convention merely
//! pins a deterministic representation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{HmfError, Result};

const HERMITICITY_TOL: f64 = 1e-12;

/// Dense Hermitian matrix with a validated self-adjointness contract.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    mat: DMatrix<C64>,
}

impl HermitianOperator {
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() < 2 {
            return Err(HmfError::DimensionMismatch(format!(
                "hermitian operator must be square with d >= 2, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let scale = mat.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let defect = (&mat - mat.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if defect > HERMITICITY_TOL * scale {
            return Err(HmfError::NotHermitian { defect });
        }
        let dim = mat.nrows();
        Ok(Self { dim, mat })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn trace_re(&self) -> f64 {
        (0..self.dim).map(|i| self.mat[(i, i)].re).sum()
    }

    /// Eigen-decomposition with eigenvalues descending and phase-fixed
    /// eigenvector columns.
    pub fn eigen_sorted(&self) -> (Vec<f64>, DMatrix<C64>) {
        eigen_sorted(&self.mat)
    }
}

pub(crate) fn eigen_sorted(mat: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(mat.clone());
    let d = mat.nrows();
    let mut cols: Vec<(f64, DVector<C64>)> = (0..d)
        .map(|i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            fix_phase(&mut v);
            (eig.eigenvalues[i], v)
        })
        .collect();
    cols.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| {
            // deterministic tie order inside degenerate eigenspaces
            for (za, zb) in a.1.iter().zip(b.1.iter()) {
                let ord = za.re.total_cmp(&zb.re).then(za.im.total_cmp(&zb.im));
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    let values: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let vectors = DMatrix::from_columns(&cols.iter().map(|c| c.1.clone()).collect::<Vec<_>>());
    (values, vectors)
}

fn fix_phase(v: &mut DVector<C64>) {
    let norm_inf = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if norm_inf == 0.0 {
        return;
    }
    for i in 0..v.len() {
        let z = v[i];
        if z.norm() > 1e-12 * norm_inf {
            let phase = z.conj() / z.norm();
            for k in 0..v.len() {
                v[k] *= phase;
            }
            return;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    SingleQubit { omega_q: f64, theta: f64 },
    TwoQubit { omega_q: f64 },
    Generic,
}

/// A system Hamiltonian together with its reservoir coupling operator and
/// the coupling eigenbasis (the pointer basis).
#[derive(Debug, Clone)]
pub struct SystemModel {
    h_s: HermitianOperator,
    x: HermitianOperator,
    x_eigenvalues: Vec<f64>,
    x_eigenvectors: DMatrix<C64>,
    kind: ModelKind,
}

impl SystemModel {
    pub fn from_operators(h_s: HermitianOperator, x: HermitianOperator) -> Result<Self> {
        Self::build(h_s, x, ModelKind::Generic)
    }

    fn build(h_s: HermitianOperator, x: HermitianOperator, kind: ModelKind) -> Result<Self> {
        if h_s.dim() != x.dim() {
            return Err(HmfError::DimensionMismatch(format!(
                "H_S is {}-dimensional but X is {}-dimensional",
                h_s.dim(),
                x.dim()
            )));
        }
        let (x_eigenvalues, x_eigenvectors) = x.eigen_sorted();
        let model = Self {
            h_s,
            x,
            x_eigenvalues,
            x_eigenvectors,
            kind,
        };
        model.check_roundtrip()?;
        Ok(model)
    }

    fn check_roundtrip(&self) -> Result<()> {
        let d = self.dim();
        let lam = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(self.x_eigenvalues[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let rec = &self.x_eigenvectors * lam * self.x_eigenvectors.adjoint();
        let scale = self
            .x
            .matrix()
            .iter()
            .map(|z| z.norm())
            .fold(1.0, f64::max);
        let defect = (rec - self.x.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let unit = self.x_eigenvectors.adjoint() * &self.x_eigenvectors;
        let id = DMatrix::<C64>::identity(d, d);
        let udef = (unit - id).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if defect > 1e-11 * scale || udef > 1e-11 {
            return Err(HmfError::NotHermitian {
                defect: defect.max(udef),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.h_s.dim()
    }

    pub fn h_s(&self) -> &HermitianOperator {
        &self.h_s
    }

    pub fn x(&self) -> &HermitianOperator {
        &self.x
    }

    pub fn x_eigenvalues(&self) -> &[f64] {
        &self.x_eigenvalues
    }

    /// Unitary whose columns are the X eigenvectors, in eigenvalue order.
    pub fn x_eigenvectors(&self) -> &DMatrix<C64> {
        &self.x_eigenvectors
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Replace the eigenbasis by `v`; used to probe invariance of results
    /// under re-phased or permuted degenerate eigenvectors.
    pub fn with_eigenbasis(mut self, values: Vec<f64>, v: DMatrix<C64>) -> Result<Self> {
        self.x_eigenvalues = values;
        self.x_eigenvectors = v;
        self.check_roundtrip()?;
        Ok(self)
    }
}

pub fn sigma_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ],
    )
}

pub fn sigma_y() -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
        ],
    )
}

pub fn sigma_z() -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
        ],
    )
}

/// Qubit with splitting `ω_q` coupled at angle `θ` between the energy and
/// coupling axes: `H_S = (ω_q/2) σ^z`, `X = cosθ σ^z - sinθ σ^x`.
///
/// In the pointer basis (eigenbasis of X) the Hamiltonian reads
/// `(ω_q/2)(cosθ τ^z + sinθ τ^x)` and the coupling is `τ^z`, with
/// eigenvalues (+1, -1).
pub fn build_single_qubit(omega_q: f64, theta: f64) -> Result<SystemModel> {
    check_omega(omega_q)?;
    let h = HermitianOperator::new(sigma_z().map(|z| z * C64::new(0.5 * omega_q, 0.0)))?;
    let x_mat = sigma_z().map(|z| z * C64::new(theta.cos(), 0.0))
        - sigma_x().map(|z| z * C64::new(theta.sin(), 0.0));
    let x = HermitianOperator::new(x_mat)?;
    SystemModel::build(h, x, ModelKind::SingleQubit { omega_q, theta })
}

/// Two qubits coupled symmetrically to a common reservoir:
/// `H_S = (ω_q/2)(σ^z_a + σ^z_b)`, `X = σ^x_a + σ^x_b`.
///
/// The coupling spectrum is {-2, 0, 0, +2}; the zero eigenvalue is doubly
/// degenerate.
pub fn build_two_qubit(omega_q: f64) -> Result<SystemModel> {
    check_omega(omega_q)?;
    let id = DMatrix::<C64>::identity(2, 2);
    let h_mat = (sigma_z().kronecker(&id) + id.kronecker(&sigma_z()))
        .map(|z| z * C64::new(0.5 * omega_q, 0.0));
    let x_mat = sigma_x().kronecker(&id) + id.kronecker(&sigma_x());
    SystemModel::build(
        HermitianOperator::new(h_mat)?,
        HermitianOperator::new(x_mat)?,
        ModelKind::TwoQubit { omega_q },
    )
}

/// Pointer-basis observables `(τ^z, τ^x)` of the single-qubit model, in the
/// original basis: `τ^z = X` and `τ^x = cosθ σ^x + sinθ σ^z`.
pub fn pointer_observables(
    model: &SystemModel,
) -> Result<(HermitianOperator, HermitianOperator)> {
    let ModelKind::SingleQubit { theta, .. } = model.kind() else {
        return Err(HmfError::UnsupportedModel(
            "pointer observables are defined for the single-qubit model".into(),
        ));
    };
    let tau_z = model.x().clone();
    let tau_x = sigma_x().map(|z| z * C64::new(theta.cos(), 0.0))
        + sigma_z().map(|z| z * C64::new(theta.sin(), 0.0));
    Ok((tau_z, HermitianOperator::new(tau_x)?))
}

fn check_omega(omega_q: f64) -> Result<()> {
    if !(omega_q > 0.0 && omega_q.is_finite()) {
        return Err(HmfError::Domain(format!(
            "omega_q must be > 0, got {omega_q}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn commutator_norm(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a * b - b * a).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn aligned_qubit_commutes() {
        let m = build_single_qubit(1.0, 0.0).unwrap();
        assert!(commutator_norm(m.h_s().matrix(), m.x().matrix()) < 1e-14);
        assert_eq!(m.x_eigenvalues(), &[1.0, -1.0]);
    }

    #[test]
    fn transverse_qubit_hamiltonian_is_off_diagonal_in_pointer_basis() {
        let m = build_single_qubit(1.0, std::f64::consts::FRAC_PI_2).unwrap();
        let v = m.x_eigenvectors();
        let h_x = v.adjoint() * m.h_s().matrix() * v;
        assert!(h_x[(0, 0)].norm() < 1e-14);
        assert!(h_x[(1, 1)].norm() < 1e-14);
        assert!(h_x[(0, 1)].norm() > 0.4);
    }

    #[test]
    fn rotation_preserves_spectrum() {
        for theta in [0.0, 0.4, 1.0, 2.2] {
            let m = build_single_qubit(1.4, theta).unwrap();
            let (vals, _) = m.h_s().eigen_sorted();
            assert_relative_eq!(vals[0], 0.7, max_relative = 1e-13);
            assert_relative_eq!(vals[1], -0.7, max_relative = 1e-13);
        }
    }

    #[test]
    fn pointer_basis_hamiltonian_matches_rotated_form() {
        let (omega_q, theta) = (1.0, 1.0);
        let m = build_single_qubit(omega_q, theta).unwrap();
        let v = m.x_eigenvectors();
        let h_x = v.adjoint() * m.h_s().matrix() * v;
        // (ω_q/2)(cosθ τ^z + sinθ τ^x)
        assert_relative_eq!(h_x[(0, 0)].re, 0.5 * omega_q * theta.cos(), epsilon = 1e-12);
        assert_relative_eq!(h_x[(1, 1)].re, -0.5 * omega_q * theta.cos(), epsilon = 1e-12);
        assert_relative_eq!(h_x[(0, 1)].re, 0.5 * omega_q * theta.sin(), epsilon = 1e-12);
        assert_relative_eq!(h_x[(0, 1)].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_roundtrip() {
        for m in [build_single_qubit(1.0, 0.7).unwrap(), build_two_qubit(2.0).unwrap()] {
            let d = m.dim();
            let lam = DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    C64::new(m.x_eigenvalues()[i], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            let rec = m.x_eigenvectors() * lam * m.x_eigenvectors().adjoint();
            let defect = (rec - m.x().matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(defect < 1e-12);
        }
    }

    #[test]
    fn two_qubit_spectra() {
        let m = build_two_qubit(1.0).unwrap();
        let (h_vals, _) = m.h_s().eigen_sorted();
        assert_relative_eq!(h_vals[0], 1.0, epsilon = 1e-13);
        assert_relative_eq!(h_vals[1], 0.0, epsilon = 1e-13);
        assert_relative_eq!(h_vals[2], 0.0, epsilon = 1e-13);
        assert_relative_eq!(h_vals[3], -1.0, epsilon = 1e-13);
        let xv = m.x_eigenvalues();
        assert_relative_eq!(xv[0], 2.0, epsilon = 1e-13);
        assert_relative_eq!(xv[1], 0.0, epsilon = 1e-13);
        assert_relative_eq!(xv[2], 0.0, epsilon = 1e-13);
        assert_relative_eq!(xv[3], -2.0, epsilon = 1e-13);
    }

    #[test]
    fn pointer_observables_algebra() {
        for theta in [0.0, 0.9, 2.0] {
            let m = build_single_qubit(1.0, theta).unwrap();
            let (tz, tx) = pointer_observables(&m).unwrap();
            assert_eq!(tz.matrix(), m.x().matrix());
            // anticommute, square to identity, orthogonal under trace
            let anti = tz.matrix() * tx.matrix() + tx.matrix() * tz.matrix();
            assert!(anti.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-13);
            let sq = tz.matrix() * tz.matrix();
            assert!((sq - DMatrix::<C64>::identity(2, 2))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
                < 1e-13);
            let tr: C64 = (tz.matrix() * tx.matrix()).diagonal().iter().sum();
            assert!(tr.norm() < 1e-13);
        }
        assert!(pointer_observables(&build_two_qubit(1.0).unwrap()).is_err());
    }

    #[test]
    fn ground_state_pointer_population() {
        // ⟨τ^z⟩ in the H_S ground state equals -cosθ
        let theta = 0.8;
        let m = build_single_qubit(1.0, theta).unwrap();
        let (vals, vecs) = m.h_s().eigen_sorted();
        assert!(vals[1] < vals[0]);
        let ground = vecs.column(1);
        let tz = m.x().matrix();
        let val: C64 = (ground.adjoint() * tz * ground)[(0, 0)];
        assert_relative_eq!(val.re, -theta.cos(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.5, 0.0),
                C64::new(0.2, 0.0),
                C64::new(1.0, 0.0),
            ],
        );
        assert!(HermitianOperator::new(m).is_err());
    }
}
