//! Reservoir spectral densities and the correlation integrals built on them:
//! the imaginary-time kernel `K(τ)`, the influence coefficients `η_m`, and
//! the real-time polaron correlation `C(s)`.
//!
//! All frequency integrals are written with non-positive exponents only
//! (`exp_m1` for the near-cancelling differences), so they stay finite for
//! arbitrarily large `βν` without ever forming `cosh`/`sinh` of large
//! arguments. For the Ohmic density the integrals run over `[0, 50 ω_c]`,
//! where the exponential cutoff bounds the tail below 1e-12 of the total;
//! below `ν = 1e-8 ω_c` the integrands switch to their analytic `ν → 0`
//! limits. A discrete density replaces every integral by the mode sum.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{HmfError, Result};
use crate::quad;

/// Frequency cutoff multiplier for Ohmic integrals.
const NU_MAX_FACTOR: f64 = 50.0;
/// Below this fraction of ω_c the integrands use their ν → 0 limits.
const NU_FLOOR_FACTOR: f64 = 1e-8;
const QUAD_REL_TOL: f64 = 1e-11;
const QUAD_MAX_PANELS: usize = 200_000;

/// One discrete reservoir mode with coupling energy `g` and frequency `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathMode {
    pub g: f64,
    pub nu: f64,
}

/// Reservoir spectral density.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    /// `J(ν) = α ν e^{-ν/ω_c}`.
    OhmicExp { alpha: f64, omega_c: f64 },
    /// `J(ν) = Σ_i g_i² δ(ν - ν_i)`.
    Discrete { modes: Vec<BathMode> },
}

impl SpectralDensity {
    pub fn ohmic_exp(alpha: f64, omega_c: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(HmfError::InvalidSpectralDensity(format!(
                "alpha must be >= 0, got {alpha}"
            )));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(HmfError::InvalidSpectralDensity(format!(
                "omega_c must be > 0, got {omega_c}"
            )));
        }
        Ok(Self::OhmicExp { alpha, omega_c })
    }

    pub fn discrete(modes: Vec<BathMode>) -> Result<Self> {
        for (i, m) in modes.iter().enumerate() {
            if !(m.nu > 0.0 && m.nu.is_finite()) || !m.g.is_finite() {
                return Err(HmfError::InvalidSpectralDensity(format!(
                    "mode {i}: need finite g and nu > 0, got g={}, nu={}",
                    m.g, m.nu
                )));
            }
        }
        Ok(Self::Discrete { modes })
    }

    /// Reorganization-energy scale `∫ J(ν)/ν dν`; `α ω_c` for the Ohmic form.
    pub fn reorganization_energy(&self) -> f64 {
        match self {
            Self::OhmicExp { alpha, omega_c } => alpha * omega_c,
            Self::Discrete { modes } => modes.iter().map(|m| m.g * m.g / m.nu).sum(),
        }
    }

    /// Integrate `J(ν) · w(ν)` over frequency, or sum `g² · w(ν_i)` for a
    /// discrete density. `limit` is the value of the full integrand at ν → 0.
    fn integrate_weight<W: Fn(f64) -> C64>(
        &self,
        weight: W,
        limit: C64,
        presplit: usize,
    ) -> Result<C64> {
        match self {
            Self::OhmicExp { alpha, omega_c } => {
                let (alpha, omega_c) = (*alpha, *omega_c);
                if alpha == 0.0 {
                    return Ok(C64::new(0.0, 0.0));
                }
                let nu_max = NU_MAX_FACTOR * omega_c;
                let floor = NU_FLOOR_FACTOR * omega_c;
                let f = |nu: f64| {
                    if nu < floor {
                        limit
                    } else {
                        weight(nu) * (alpha * nu * (-nu / omega_c).exp())
                    }
                };
                let points = if presplit > 1 {
                    quad::uniform_panels(0.0, nu_max, presplit)
                } else {
                    vec![0.0, 0.5 * omega_c, 2.0 * omega_c, 10.0 * omega_c, nu_max]
                };
                let q = quad::integrate(f, &points, QUAD_REL_TOL, 0.0, QUAD_MAX_PANELS)?;
                Ok(q.value)
            }
            Self::Discrete { modes } => {
                let mut acc = C64::new(0.0, 0.0);
                for m in modes {
                    acc += weight(m.nu) * (m.g * m.g);
                }
                Ok(acc)
            }
        }
    }
}

/// `x - (1 - e^{-x})`, accurate for small x.
fn x_minus_one_plus_exp_neg(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // x²/2 - x³/6 + x⁴/24 - x⁵/120
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0)
    } else {
        x + (-x).exp_m1()
    }
}

/// `(e^{-τν} + e^{-(β-τ)ν}) / (1 - e^{-βν})`: the thermal weight of `K`.
fn k_weight(nu: f64, tau: f64, beta: f64) -> f64 {
    let den = -(-beta * nu).exp_m1();
    ((-tau * nu).exp() + (-(beta - tau) * nu).exp()) / den
}

/// Imaginary-time reservoir correlation function
/// `K(τ) = ∫ dν J(ν) cosh(βν/2 - τν)/sinh(βν/2)`.
///
/// Periodic on the thermal circle: `K(β) = K(0)` and `K(τ) = K(β - τ)`.
pub fn correlation_k(j: &SpectralDensity, beta: f64, tau: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(0.0..=beta).contains(&tau) {
        return Err(HmfError::Domain(format!(
            "tau must lie in [0, beta]; got tau={tau}, beta={beta}"
        )));
    }
    let limit = match j {
        SpectralDensity::OhmicExp { alpha, .. } => C64::new(2.0 * alpha / beta, 0.0),
        SpectralDensity::Discrete { .. } => C64::new(0.0, 0.0),
    };
    let v = j.integrate_weight(|nu| C64::new(k_weight(nu, tau, beta), 0.0), limit, 0)?;
    Ok(v.re)
}

/// Influence coefficients for an `N`-step imaginary-time discretization.
///
/// The two-index coefficients are stationary, `η_{kk'} = eta[k - k']`:
/// `K` depends only on the time difference, so only the separation matters.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceKernel {
    beta: f64,
    n_steps: usize,
    delta: f64,
    eta: Vec<f64>,
}

impl InfluenceKernel {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Coefficient at time-step separation `m`.
    pub fn eta(&self, m: usize) -> f64 {
        self.eta[m]
    }

    /// Two-index form `η_{kk'}` for `k >= k'`.
    pub fn eta_pair(&self, k: usize, kp: usize) -> f64 {
        self.eta[k - kp]
    }

    pub fn eta_slice(&self) -> &[f64] {
        &self.eta
    }
}

/// Weight of the off-diagonal coefficient before the `J(ν)` factor:
/// the double cell integral of `K` reduced to a single frequency integral,
/// `(1-e^{-Δν})² (e^{-(m-1)Δν} + e^{-(β-(m+1)Δ)ν}) / (ν² (1-e^{-βν}))`.
fn eta_off_weight(nu: f64, m: usize, delta: f64, beta: f64) -> f64 {
    let q = -(-delta * nu).exp_m1();
    let den = -(-beta * nu).exp_m1();
    let mf = m as f64;
    let e1 = (-(mf - 1.0) * delta * nu).exp();
    let e2 = (-(beta - (mf + 1.0) * delta) * nu).exp();
    q * q * (e1 + e2) / (den * nu * nu)
}

/// Weight of the diagonal coefficient: triangular self-cell integral,
/// `[ (Δν - 1 + e^{-Δν}) + (1-e^{-Δν})² e^{-(β-Δ)ν} / (1-e^{-βν}) ] / ν²`.
fn eta_diag_weight(nu: f64, delta: f64, beta: f64) -> f64 {
    let g = x_minus_one_plus_exp_neg(delta * nu);
    let q = -(-delta * nu).exp_m1();
    let den = -(-beta * nu).exp_m1();
    (g + q * q * (-(beta - delta) * nu).exp() / den) / (nu * nu)
}

/// Build the influence coefficients for `(J, β, N)`.
pub fn influence_kernel(j: &SpectralDensity, beta: f64, n_steps: usize) -> Result<InfluenceKernel> {
    check_beta(beta)?;
    if n_steps < 2 {
        return Err(HmfError::Domain(format!(
            "need at least 2 imaginary-time steps, got {n_steps}"
        )));
    }
    let delta = beta / n_steps as f64;
    let mut eta = Vec::with_capacity(n_steps);
    for m in 0..n_steps {
        let (weight, limit): (Box<dyn Fn(f64) -> C64>, C64) = if m == 0 {
            (
                Box::new(move |nu| C64::new(eta_diag_weight(nu, delta, beta), 0.0)),
                C64::new(ohmic_limit(j) * delta * delta / beta, 0.0),
            )
        } else {
            (
                Box::new(move |nu| C64::new(eta_off_weight(nu, m, delta, beta), 0.0)),
                C64::new(2.0 * ohmic_limit(j) * delta * delta / beta, 0.0),
            )
        };
        let v = j.integrate_weight(|nu| weight(nu), limit, 0)?;
        eta.push(v.re);
    }
    Ok(InfluenceKernel {
        beta,
        n_steps,
        delta,
        eta,
    })
}

fn ohmic_limit(j: &SpectralDensity) -> f64 {
    match j {
        SpectralDensity::OhmicExp { alpha, .. } => *alpha,
        SpectralDensity::Discrete { .. } => 0.0,
    }
}

/// Complex weight of the polaron correlation before the `J(ν)` factor:
/// `[2 coth(βν/2) sin²(νs/2) + i sin(νs)] / ν²`.
fn c_weight(nu: f64, s: f64, beta: f64) -> C64 {
    let coth = (1.0 + (-beta * nu).exp()) / (-(-beta * nu).exp_m1());
    let half = (0.5 * nu * s).sin();
    C64::new(2.0 * coth * half * half, (nu * s).sin()) / (nu * nu)
}

/// Real-time polaron correlation
/// `C(s) = ∫ dν J(ν)/ν² [2 coth(βν/2) sin²(νs/2) + i sin(νs)]`.
///
/// `C(0) = 0` and `C(-s) = C(s)*` hold structurally through the parity of
/// `sin²` and `sin`.
pub fn polaron_c(j: &SpectralDensity, beta: f64, s: f64) -> Result<C64> {
    check_beta(beta)?;
    if s == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let limit = match j {
        SpectralDensity::OhmicExp { alpha, .. } => C64::new(alpha * s * s / beta, alpha * s),
        SpectralDensity::Discrete { .. } => C64::new(0.0, 0.0),
    };
    // pre-split so each starting panel spans at most ~half an oscillation
    let presplit = match j {
        SpectralDensity::OhmicExp { omega_c, .. } => {
            let nu_max = NU_MAX_FACTOR * omega_c;
            ((nu_max * s.abs() / std::f64::consts::PI).ceil() as usize).clamp(4, 30_000)
        }
        SpectralDensity::Discrete { .. } => 0,
    };
    j.integrate_weight(|nu| c_weight(nu, s, beta), limit, presplit)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(HmfError::Domain(format!("beta must be > 0, got {beta}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single_mode() -> SpectralDensity {
        SpectralDensity::discrete(vec![BathMode { g: 1.0, nu: 1.0 }]).unwrap()
    }

    fn ohmic(alpha: f64, omega_c: f64) -> SpectralDensity {
        SpectralDensity::ohmic_exp(alpha, omega_c).unwrap()
    }

    /// Adaptive Simpson on [a, b]; second quadrature family for cross-checks.
    fn simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        fn rule<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
            let m = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
        }
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
            let m = 0.5 * (a + b);
            let left = rule(f, a, m);
            let right = rule(f, m, b);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
            }
        }
        let whole = rule(&f, a, b);
        rec(&f, a, b, whole, tol, depth)
    }

    #[test]
    fn single_mode_k_at_zero_is_coth() {
        // K(0) = g² coth(βν/2)
        let k0 = correlation_k(&single_mode(), 1.0, 0.0).unwrap();
        let want = 1.0 / (0.5f64).tanh();
        assert_relative_eq!(k0, want, max_relative = 1e-13);
        assert_relative_eq!(k0, 2.163953, max_relative = 1e-6);
    }

    #[test]
    fn k_is_periodic_on_the_thermal_circle() {
        for j in [single_mode(), ohmic(0.2, 10.0)] {
            let beta = 1.3;
            let k0 = correlation_k(&j, beta, 0.0).unwrap();
            let kb = correlation_k(&j, beta, beta).unwrap();
            assert_relative_eq!(k0, kb, max_relative = 1e-10);
            for tau in [0.1, 0.35, 0.62] {
                let a = correlation_k(&j, beta, tau).unwrap();
                let b = correlation_k(&j, beta, beta - tau).unwrap();
                assert_relative_eq!(a, b, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn ohmic_k_monotone_decreasing_to_midpoint() {
        let j = ohmic(0.2, 10.0);
        let beta = 1.0;
        let mut last = f64::INFINITY;
        for i in 0..=20 {
            let tau = 0.5 * beta * (i as f64) / 20.0;
            let k = correlation_k(&j, beta, tau).unwrap();
            assert!(k > 0.0);
            assert!(k < last, "K must decrease on [0, beta/2]");
            last = k;
        }
    }

    #[test]
    fn ohmic_k_against_independent_quadrature() {
        let (alpha, omega_c, beta, tau) = (0.2, 10.0, 1.0, 0.5);
        let k = correlation_k(&ohmic(alpha, omega_c), beta, tau).unwrap();
        let integrand = |nu: f64| {
            if nu < 1e-12 {
                2.0 * alpha / beta
            } else {
                alpha * nu * (-nu / omega_c).exp() * k_weight(nu, tau, beta)
            }
        };
        let oracle = simpson(integrand, 0.0, 50.0 * omega_c, 1e-13, 40);
        assert_relative_eq!(k, oracle, max_relative = 1e-8);
    }

    #[test]
    fn k_domain_checks() {
        assert!(correlation_k(&single_mode(), 1.0, -0.1).is_err());
        assert!(correlation_k(&single_mode(), 1.0, 1.1).is_err());
        assert!(correlation_k(&single_mode(), -1.0, 0.0).is_err());
    }

    /// 2-D tensor-product Gauss–Legendre over one (k, k') cell pair of the
    /// double integral defining η; validates the analytic reduction.
    fn eta_cell_2d(j: &SpectralDensity, beta: f64, n: usize, k: usize, kp: usize) -> f64 {
        let delta = beta / n as f64;
        // 32-point Gauss–Legendre nodes/weights on [-1, 1] via Newton iteration
        let (nodes, weights) = gauss_legendre(48);
        let kf = |tau: f64| correlation_k(j, beta, tau).unwrap();
        let (a1, b1) = (k as f64 * delta, (k as f64 + 1.0) * delta);
        let mut acc = 0.0;
        for (&x1, &w1) in nodes.iter().zip(&weights) {
            let tau = 0.5 * (b1 - a1) * x1 + 0.5 * (a1 + b1);
            let (a2, b2) = if k == kp {
                (kp as f64 * delta, tau)
            } else {
                (kp as f64 * delta, (kp as f64 + 1.0) * delta)
            };
            let mut inner = 0.0;
            for (&x2, &w2) in nodes.iter().zip(&weights) {
                let taup = 0.5 * (b2 - a2) * x2 + 0.5 * (a2 + b2);
                inner += w2 * kf(tau - taup);
            }
            acc += w1 * inner * 0.5 * (b2 - a2);
        }
        acc * 0.5 * (b1 - a1)
    }

    fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, 0.0);
                for k in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * k as f64 + 1.0) * x * p1 - k as f64 * p2) / (k as f64 + 1.0);
                }
                let dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
                let dx = p0 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k as f64 + 1.0) * x * p1 - k as f64 * p2) / (k as f64 + 1.0);
            }
            let dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    }

    #[test]
    fn eta_single_mode_matches_2d_cell_quadrature() {
        let j = single_mode();
        let (beta, n) = (1.0, 4);
        let kernel = influence_kernel(&j, beta, n).unwrap();
        // off-diagonal separation 1: cells (2, 1)
        let want = eta_cell_2d(&j, beta, n, 2, 1);
        assert_relative_eq!(kernel.eta(1), want, max_relative = 1e-9);
        // diagonal cell (1, 1)
        let want0 = eta_cell_2d(&j, beta, n, 1, 1);
        assert_relative_eq!(kernel.eta(0), want0, max_relative = 1e-9);
    }

    #[test]
    fn eta_ohmic_matches_2d_cell_quadrature() {
        let j = ohmic(0.2, 10.0);
        let (beta, n) = (1.0, 8);
        let kernel = influence_kernel(&j, beta, n).unwrap();
        for m in [0usize, 1, 5] {
            let want = eta_cell_2d(&j, beta, n, m + 1, 1);
            assert_relative_eq!(kernel.eta(m), want, max_relative = 1e-8);
        }
    }

    #[test]
    fn eta_pair_is_stationary() {
        let kernel = influence_kernel(&single_mode(), 1.0, 6).unwrap();
        assert_eq!(kernel.eta_pair(3, 1), kernel.eta_pair(5, 3));
        assert_eq!(kernel.eta_pair(2, 2), kernel.eta(0));
    }

    #[test]
    fn eta_aggregate_matches_integral_of_k() {
        // Σ_{k ≥ k'} η_{kk'} = ∫_0^β dτ ∫_0^τ dτ' K(τ - τ'): the triangular
        // cells plus diagonals tile the lower triangle exactly.
        let j = ohmic(0.2, 10.0);
        let (beta, n) = (1.0, 100);
        let kernel = influence_kernel(&j, beta, n).unwrap();
        let mut total = 0.0;
        for k in 0..n {
            for kp in 0..=k {
                total += kernel.eta_pair(k, kp);
            }
        }
        // reduce the double integral: ∫_0^β (β - u) K(u) du
        let inner = |u: f64| (beta - u) * correlation_k(&j, beta, u).unwrap();
        let oracle = simpson(inner, 0.0, beta, 1e-12, 30);
        assert_relative_eq!(total, oracle, max_relative = 1e-8);
    }

    #[test]
    fn linearity_in_alpha() {
        let (beta, n) = (0.8, 12);
        let j1 = ohmic(0.2, 10.0);
        let j2 = ohmic(0.4, 10.0);
        let k1 = correlation_k(&j1, beta, 0.3).unwrap();
        let k2 = correlation_k(&j2, beta, 0.3).unwrap();
        assert_relative_eq!(2.0 * k1, k2, max_relative = 1e-11);
        let e1 = influence_kernel(&j1, beta, n).unwrap();
        let e2 = influence_kernel(&j2, beta, n).unwrap();
        for m in 0..n {
            assert_relative_eq!(2.0 * e1.eta(m), e2.eta(m), max_relative = 1e-10);
        }
        let c1 = polaron_c(&j1, beta, 0.7).unwrap();
        let c2 = polaron_c(&j2, beta, 0.7).unwrap();
        assert_relative_eq!(2.0 * c1.re, c2.re, max_relative = 1e-10);
        assert_relative_eq!(2.0 * c1.im, c2.im, max_relative = 1e-10);
    }

    #[test]
    fn polaron_c_basic_properties() {
        for j in [ohmic(0.5, 10.0), single_mode()] {
            let beta = 1.0;
            let c0 = polaron_c(&j, beta, 0.0).unwrap();
            assert_eq!(c0, C64::new(0.0, 0.0));
            for s in [0.3, 1.7] {
                let plus = polaron_c(&j, beta, s).unwrap();
                let minus = polaron_c(&j, beta, -s).unwrap();
                assert_relative_eq!(plus.re, minus.re, max_relative = 1e-9);
                assert_relative_eq!(plus.im, -minus.im, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn polaron_c_imaginary_part_closed_form() {
        // Im C(s) = α arctan(ω_c s) for the Ohmic density
        let (alpha, omega_c, beta) = (0.5, 10.0, 1.0);
        let j = ohmic(alpha, omega_c);
        for s in [0.2, 1.0, 5.0] {
            let c = polaron_c(&j, beta, s).unwrap();
            let want = alpha * (omega_c * s).atan();
            assert_relative_eq!(c.im, want, max_relative = 1e-8);
        }
        let c1 = polaron_c(&j, beta, 1.0).unwrap();
        assert_relative_eq!(c1.im, 0.7355638, max_relative = 1e-5);
    }

    #[test]
    fn polaron_c_real_part_grows_linearly_at_large_s() {
        // Re C(s) ≈ π α s / β once s ≫ β: guarantees the rate integral
        // truncation terminates.
        let (alpha, beta) = (0.5, 1.0);
        let j = ohmic(alpha, 10.0);
        let r1 = polaron_c(&j, beta, 20.0).unwrap().re;
        let r2 = polaron_c(&j, beta, 40.0).unwrap().re;
        let slope = (r2 - r1) / 20.0;
        assert_relative_eq!(slope, std::f64::consts::PI * alpha / beta, max_relative = 0.05);
    }
}
