//! Strong-coupling polaron (Förster) theory for the single-qubit model:
//! transition rates between the pointer states, the relaxation time, and the
//! rate-equation steady state.
//!
//! The rates are
//! `Γ± = (ω_q sinθ/2)² ∫ ds e^{∓ i s ΔE - 4 C(s)}` with `ΔE = ω_q cosθ`.
//! Using `C(-s) = C(s)*`, the full-line integral is taken as twice the real
//! part of the half-line integral, which makes the rates real by
//! construction. The integrand magnitude is `e^{-4 Re C}`; since `Re C`
//! grows linearly at large `s` for an Ohmic reservoir, truncation at
//! `4 Re C(S) > 46` (integrand below 1e-20) always terminates.

use num_complex::Complex64 as C64;

use crate::bath::{polaron_c, SpectralDensity};
use crate::error::{HmfError, Result};
use crate::quad;

/// Truncation threshold: stop once `4 Re C(S)` exceeds this.
const EXPONENT_CUTOFF: f64 = 46.0;
/// Search cap for the truncation point, in units of β.
const S_MAX_BETAS: f64 = 1e5;
const RATE_REL_TOL: f64 = 1e-9;
const RATE_MAX_PANELS: usize = 60_000;

/// Pointer-state transition rates and derived timescale.
#[derive(Debug, Clone, Copy)]
pub struct PolaronRates {
    /// Upward rate (into the higher pointer state).
    pub gamma_plus: f64,
    /// Downward rate.
    pub gamma_minus: f64,
    /// Pointer splitting `ΔE = ω_q cosθ`.
    pub delta_e: f64,
    /// Population relaxation time, `1/(Γ₊ + Γ₋)`.
    pub t0: f64,
    /// Detailed-balance residual `|Γ₊ - Γ₋ e^{-βΔE}| / Γ₋`.
    pub ks_residual: f64,
    /// `ω_q sinθ / ∫ J(ν)/ν dν`: the perturbative expansion parameter. The
    /// treatment is reliable only when this is small.
    pub validity_ratio: f64,
    /// Set when `validity_ratio > 0.1`; advisory, never enforced.
    pub validity_flagged: bool,
    /// Error bound reported by the rate quadrature, relative to the rate.
    pub quad_error: f64,
}

/// Find the truncation point `S` with `4 Re C(S) > 46` by geometric search.
fn truncation_point(j: &SpectralDensity, beta: f64) -> Result<f64> {
    let s_max = S_MAX_BETAS * beta;
    let mut s = beta;
    loop {
        let c = polaron_c(j, beta, s)?;
        if 4.0 * c.re > EXPONENT_CUTOFF {
            return Ok(s);
        }
        s *= 1.6;
        if s > s_max {
            let partial = polaron_c(j, beta, s_max)?.re;
            return Err(HmfError::RateIntegral {
                s_max,
                partial,
            });
        }
    }
}

/// Transition rates of the polaron master equation for the single-qubit
/// model at mixing angle `theta`.
pub fn polaron_rates(
    omega_q: f64,
    theta: f64,
    j: &SpectralDensity,
    beta: f64,
) -> Result<PolaronRates> {
    if !(omega_q > 0.0 && omega_q.is_finite()) {
        return Err(HmfError::Domain(format!(
            "omega_q must be > 0, got {omega_q}"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(HmfError::Domain(format!("beta must be > 0, got {beta}")));
    }
    let delta_e = omega_q * theta.cos();
    let reorg = j.reorganization_energy();
    let validity_ratio = if reorg > 0.0 {
        omega_q * theta.sin().abs() / reorg
    } else {
        f64::INFINITY
    };
    let validity_flagged = validity_ratio > 0.1;

    let prefactor = (0.5 * omega_q * theta.sin()).powi(2);
    if prefactor == 0.0 {
        // sin²θ = 0 kills both rates exactly
        return Ok(PolaronRates {
            gamma_plus: 0.0,
            gamma_minus: 0.0,
            delta_e,
            t0: f64::INFINITY,
            ks_residual: 0.0,
            validity_ratio,
            validity_flagged,
            quad_error: 0.0,
        });
    }

    let s_end = truncation_point(j, beta)?;
    // panels no wider than the phase oscillation or the correlation scale
    let width = (std::f64::consts::PI / delta_e.abs().max(1e-12))
        .min(0.5 * beta)
        .min(s_end);
    let n_panels = ((s_end / width).ceil() as usize).clamp(8, 4096);
    let points = quad::uniform_panels(0.0, s_end, n_panels);

    let integral = |sign: f64| -> Result<(f64, f64)> {
        let q = quad::integrate(
            |s| {
                let c = polaron_c(j, beta, s).unwrap_or(C64::new(f64::NAN, f64::NAN));
                (C64::new(0.0, sign * s * delta_e) - c * 4.0).exp()
            },
            &points,
            RATE_REL_TOL,
            0.0,
            RATE_MAX_PANELS,
        )?;
        Ok((2.0 * q.value.re, q.error_bound))
    };

    let (int_plus, err_plus) = integral(-1.0)?;
    let (int_minus, err_minus) = integral(1.0)?;
    let gamma_plus = prefactor * int_plus;
    let gamma_minus = prefactor * int_minus;
    if !(gamma_plus.is_finite() && gamma_minus.is_finite()) || gamma_minus <= 0.0 {
        return Err(HmfError::RateIntegral {
            s_max: s_end,
            partial: gamma_minus,
        });
    }
    let ks_residual = (gamma_plus - gamma_minus * (-beta * delta_e).exp()).abs() / gamma_minus;
    let quad_error = prefactor * (err_plus + err_minus) / gamma_minus.min(gamma_plus.max(1e-300));

    Ok(PolaronRates {
        gamma_plus,
        gamma_minus,
        delta_e,
        t0: 1.0 / (gamma_plus + gamma_minus),
        ks_residual,
        validity_ratio,
        validity_flagged,
        quad_error,
    })
}

/// Steady state of the rate equation: populations of the upper and lower
/// pointer states, with `P_up / P_down = Γ₊ / Γ₋`.
pub fn polaron_steady_state(rates: &PolaronRates, _beta: f64) -> Result<(f64, f64)> {
    let total = rates.gamma_plus + rates.gamma_minus;
    if !(total > 0.0) {
        return Err(HmfError::DegenerateSteadyState);
    }
    let p_up = rates.gamma_plus / total;
    let p_down = rates.gamma_minus / total;
    Ok((p_up, p_down))
}
