//! Gaussian noise calibration.
//!
//! The analytic condition for the Gaussian mechanism with sensitivity `Δ`
//! and scale `σ` only depends on the ratio `u = σ / Δ`:
//!
//! ```text
//! g(u) = Φ(1/(2u) - εu) - e^ε Φ(-1/(2u) - εu)
//! ```
//!
//! `g` falls strictly from 1 (as `u -> 0`) to 0 (as `u -> ∞`), so the
//! smallest admissible ratio `u*` with `g(u*) <= δ` is found by bisection and
//! then scaled by each neighbourhood's sensitivity.
//!
//! Everything here works in `f64`.

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};

/// Default relative tolerance of the `u*` search.
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_BRACKET_STEPS: usize = 2100;
const MAX_BISECTIONS: usize = 400;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn phi(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

/// `ln Φ(t)`, accurate far into the lower tail where `Φ(t)` underflows.
pub fn ln_phi(t: f64) -> f64 {
    if t > -35.0 {
        return phi(t).ln();
    }
    if t == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    // Mills-ratio asymptotic series; the truncation error is below 1e-13
    // relative at |t| >= 35.
    let r = 1.0 / (t * t);
    let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r * (1.0 - 9.0 * r))));
    -0.5 * t * t - LN_SQRT_2PI - (-t).ln() + series.ln()
}

/// Privacy level `(ε, δ)` plus the relative tolerance of the `u*` search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub tol: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        Self::with_tol(epsilon, delta, DEFAULT_TOL)
    }

    pub fn with_tol(epsilon: f64, delta: f64, tol: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::param(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(tol > 0.0 && tol < 0.1) {
            return Err(Error::param(format!("tolerance must lie in (0, 0.1), got {tol}")));
        }
        Ok(Self { epsilon, delta, tol })
    }

    /// δ = 1/n, the usual choice for a vocabulary of `n` words.
    pub fn with_vocabulary_delta(epsilon: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("delta = 1/n needs n >= 2"));
        }
        Self::new(epsilon, 1.0 / n as f64)
    }
}

fn check_u(u: f64) -> Result<()> {
    if u > 0.0 && !u.is_nan() {
        Ok(())
    } else {
        Err(Error::param(format!("u must be > 0, got {u}")))
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("epsilon must be finite and >= 0, got {epsilon}")))
    }
}

/// The DP condition function `g(u)`.
///
/// The subtracted term `e^ε Φ(-a)` is formed in log space so that large `ε`
/// never meets an underflowed `Φ`.
pub fn g(u: f64, epsilon: f64) -> Result<f64> {
    check_u(u)?;
    check_epsilon(epsilon)?;
    if u.is_infinite() {
        return Ok(0.0);
    }
    let half_inv = 0.5 / u;
    let eu = epsilon * u;
    let plus = phi(half_inv - eu);
    let minus = (epsilon + ln_phi(-half_inv - eu)).exp();
    Ok(plus - minus)
}

/// `g'(u) = -(1/u²) · exp(-(1/(2u) - εu)² / 2) / √(2π)`.
pub fn g_derivative(u: f64, epsilon: f64) -> Result<f64> {
    check_u(u)?;
    check_epsilon(epsilon)?;
    if u.is_infinite() {
        return Ok(0.0);
    }
    let b = 0.5 / u - epsilon * u;
    Ok(-(-0.5 * b * b - LN_SQRT_2PI - 2.0 * u.ln()).exp())
}

/// Left-hand side of the analytic Gaussian condition written in terms of
/// sensitivity and scale:
/// `Φ(Δ/(2σ) - εσ/Δ) - e^ε Φ(-Δ/(2σ) - εσ/Δ)`.
pub fn dp_condition_lhs(sensitivity: f64, sigma: f64, epsilon: f64) -> f64 {
    let a = sensitivity / (2.0 * sigma);
    let b = epsilon * sigma / sensitivity;
    phi(a - b) - epsilon.exp() * phi(-a - b)
}

/// Smallest `u > 0` with `g(u) <= δ`.
///
/// The bracket starts at `u = 1` and is doubled or halved until it straddles
/// the root; bisection then runs until the bracket's relative width is below
/// `params.tol`. The upper end is returned, so `g(u*) <= δ` holds as computed.
pub fn solve_u_star(params: &PrivacyParams) -> Result<f64> {
    let PrivacyParams { epsilon, delta, tol } = *params;
    let above = |u: f64| -> Result<bool> { Ok(g(u, epsilon)? > delta) };

    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    if above(hi)? {
        let mut steps = 0;
        while above(hi)? {
            lo = hi;
            hi *= 2.0;
            steps += 1;
            if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
                return Err(Error::NoConvergence(format!(
                    "no upper bracket for epsilon = {epsilon}, delta = {delta}"
                )));
            }
        }
    } else {
        let mut steps = 0;
        while !above(lo)? {
            hi = lo;
            lo *= 0.5;
            steps += 1;
            if steps > MAX_BRACKET_STEPS || lo == 0.0 {
                return Err(Error::NoConvergence(format!(
                    "no lower bracket for epsilon = {epsilon}, delta = {delta}"
                )));
            }
        }
    }

    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol * hi {
            return Ok(hi);
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return Ok(hi);
        }
        if above(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(format!(
        "bisection budget exhausted for epsilon = {epsilon}, delta = {delta}"
    )))
}

/// Single-scale calibration `σ = Δ √(2 ln(1.25/δ)) / ε`.
///
/// Only valid for `ε, δ ∈ (0, 1)`.
pub fn classic_gaussian_sigma(epsilon: f64, delta: f64, sensitivity: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(format!(
            "the classic Gaussian calibration sigma = Δ·sqrt(2 ln(1.25/δ))/ε holds only for \
             epsilon in the open interval (0, 1); got epsilon = {epsilon}"
        )));
    }
    classic_gaussian_sigma_extrapolated(epsilon, delta, sensitivity)
}

/// The classic formula evaluated for any `ε > 0`. For `ε >= 1` the result
/// carries no privacy guarantee; it exists to reproduce baseline sweeps that
/// extend past the unit interval.
pub fn classic_gaussian_sigma_extrapolated(epsilon: f64, delta: f64, sensitivity: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("epsilon must be a finite value > 0, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!(
            "the classic Gaussian calibration holds only for delta in (0, 1); got delta = {delta}"
        )));
    }
    if !(sensitivity.is_finite() && sensitivity >= 0.0) {
        return Err(Error::param(format!("sensitivity must be >= 0, got {sensitivity}")));
    }
    Ok(sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

/// Whether Gaussian noise of scale `sigma` on a query of sensitivity
/// `sensitivity` satisfies the analytic `(ε, δ)` condition, i.e.
/// `g(σ/Δ) <= δ`.
///
/// Zero sensitivity needs no noise; non-positive `sigma` with positive
/// sensitivity never qualifies.
pub fn check_dp_condition(sensitivity: f64, sigma: f64, params: &PrivacyParams) -> bool {
    if sensitivity == 0.0 {
        return true;
    }
    if !(sensitivity > 0.0) || !(sigma > 0.0) {
        return false;
    }
    match g(sigma / sensitivity, params.epsilon) {
        Ok(v) => v <= params.delta,
        Err(_) => false,
    }
}

/// `u*` together with the noise scale of every neighbourhood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub u_star: f64,
    pub sigma_per_component: Vec<f64>,
    pub params: PrivacyParams,
}

/// Solves for `u*` and sets `σ_i = u* · Δ_i`.
pub fn calibrate(params: &PrivacyParams, local_sensitivities: &[f64]) -> Result<CalibrationResult> {
    if let Some(bad) = local_sensitivities.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::param(format!("local sensitivity must be finite and >= 0, got {bad}")));
    }
    let u_star = solve_u_star(params)?;
    Ok(CalibrationResult {
        u_star,
        sigma_per_component: local_sensitivities.iter().map(|&d| u_star * d).collect(),
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_basics() {
        assert_eq!(phi(0.0), 0.5);
        // Φ(1.96) from a 1e-12 quadrature of the density (see tests/calibration.rs).
        assert!((phi(1.96) - 0.975_002_104_851_779_6).abs() < 1e-14);
        for &t in &[0.3, 1.7, 4.2, 9.0, 20.0] {
            assert!((phi(t) + phi(-t) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ln_phi_is_continuous_at_switch() {
        let series = ln_phi(-35.0 - 1e-13);
        let direct = phi(-35.0).ln();
        assert!((series - direct).abs() < 1e-9 * direct.abs(), "{series} vs {direct}");
        assert!(ln_phi(-1e4).is_finite());
        assert!(ln_phi(-1e4) < -4.9e7);
    }

    #[test]
    fn g_limits() {
        for &eps in &[0.0, 0.5, 5.0, 40.0] {
            assert!((g(1e-9, eps).unwrap() - 1.0).abs() < 1e-12);
            assert!(g(1e9, eps).unwrap().abs() < 1e-8);
            assert_eq!(g(f64::INFINITY, eps).unwrap(), 0.0);
        }
        assert!(g(0.0, 1.0).is_err());
        assert!(g(-1.0, 1.0).is_err());
        assert!(g(1.0, -1.0).is_err());
    }

    #[test]
    fn g_matches_condition_form() {
        for &(u, eps) in &[(0.3, 1.0), (2.5, 0.1), (0.05, 20.0), (1.0, 0.0)] {
            let delta_sens = 3.7;
            let lhs = dp_condition_lhs(delta_sens, u * delta_sens, eps);
            assert!((g(u, eps).unwrap() - lhs).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_zero_closed_form() {
        for &u in &[0.1, 1.0, 7.0] {
            let want = 1.0 - 2.0 * phi(-0.5 / u);
            assert!((g(u, 0.0).unwrap() - want).abs() < 1e-15);
        }
        let p = PrivacyParams::new(0.0, 0.01).unwrap();
        let u = solve_u_star(&p).unwrap();
        assert!(g(u, 0.0).unwrap() <= 0.01);
    }

    #[test]
    fn u_star_is_minimal() {
        for &eps in &[0.1, 1.0, 5.0, 10.0, 20.0, 40.0] {
            for &delta in &[1e-6, 1.0 / 73404.0, 1e-3, 0.1] {
                let p = PrivacyParams::new(eps, delta).unwrap();
                let u = solve_u_star(&p).unwrap();
                assert!(g(u, eps).unwrap() <= delta);
                assert!(g(u * (1.0 - 10.0 * p.tol), eps).unwrap() > delta, "eps={eps} delta={delta}");
            }
        }
    }

    #[test]
    fn classic_sigma_examples() {
        let delta = 1.25 * (-2.0f64).exp();
        let s = classic_gaussian_sigma(1.0 - 1e-12, delta, 1.0).unwrap();
        assert!((s - 2.0).abs() < 1e-9);
        assert_eq!(classic_gaussian_sigma(0.5, 0.01, 0.0).unwrap(), 0.0);
        let s = classic_gaussian_sigma(0.5, 1.0 / 73404.0, 1.0).unwrap();
        assert!((s - 9.561_120_126_991_303).abs() < 1e-12, "{s}");
        let err = classic_gaussian_sigma(1.5, 0.01, 1.0).unwrap_err().to_string();
        assert!(err.contains("(0, 1)"), "{err}");
        assert!(classic_gaussian_sigma(0.0, 0.01, 1.0).is_err());
    }

    #[test]
    fn check_condition_edges() {
        let p = PrivacyParams::new(1.0, 0.01).unwrap();
        let u = solve_u_star(&p).unwrap();
        assert!(check_dp_condition(2.0, u * 2.0, &p));
        assert!(!check_dp_condition(2.0, 0.99 * u * 2.0, &p));
        assert!(check_dp_condition(2.0, f64::INFINITY, &p));
        assert!(!check_dp_condition(2.0, 1e-300, &p));
        assert!(!check_dp_condition(2.0, 0.0, &p));
        assert!(check_dp_condition(0.0, 0.0, &p));
    }

    #[test]
    fn params_validation() {
        assert!(PrivacyParams::new(-0.1, 0.1).is_err());
        assert!(PrivacyParams::new(1.0, 0.0).is_err());
        assert!(PrivacyParams::new(1.0, 1.0).is_err());
        assert!(PrivacyParams::with_tol(1.0, 0.1, 0.0).is_err());
        let p = PrivacyParams::with_vocabulary_delta(1.0, 73404).unwrap();
        assert!((p.delta - 0.000_013_623).abs() < 1e-9);
    }

    #[test]
    fn calibrate_scales_by_sensitivity() {
        let p = PrivacyParams::new(2.0, 1e-5).unwrap();
        let c = calibrate(&p, &[0.0, 1.0, 2.5]).unwrap();
        assert_eq!(c.sigma_per_component[0], 0.0);
        assert_eq!(c.sigma_per_component[1], c.u_star);
        assert_eq!(c.sigma_per_component[2], 2.5 * c.u_star);
        assert!(calibrate(&p, &[-1.0]).is_err());
    }
}
