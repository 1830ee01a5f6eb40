//! Closed form for one data qubit and one ancilla under collective dephasing,
//! probed by alternating x and y measurements every `tau`.

use crate::error::{QffError, Result};
use crate::metrics::golden_section;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoQubitAnalytic {
    pub tau: f64,
    /// `mu2 / mu1`.
    pub mu_ratio: f64,
    pub t_triv: f64,
    /// Bayesian correction angle per cycle.
    pub theta: f64,
    /// Coherence retention factor per cycle.
    pub g: f64,
    pub t_eff: f64,
}

/// Effective decay time of the alternating-axis protocol.
///
/// With `x = tau / t_triv` and `r = mu2 / mu1`:
/// `tan theta = exp(-2 x r^2) sinh(4 x r)`, `g = exp(-2 x) / cos theta`
/// and `T_eff = -2 tau / ln g`.
pub fn analytic_two_qubit(tau: f64, mu1: f64, mu2: f64, t_triv: f64) -> Result<TwoQubitAnalytic> {
    if !(tau > 0.0) || !(mu1 > 0.0) || !(t_triv > 0.0) || !tau.is_finite() || !mu2.is_finite() {
        return Err(QffError::InvalidParameter(format!("tau = {tau}, mu = ({mu1}, {mu2}), t_triv = {t_triv}")));
    }
    let ratio = (mu2 / mu1).abs();
    let x = tau / t_triv;
    // tan theta written as a difference of exponentials to avoid overflowing sinh.
    let tan = 0.5 * ((4.0 * x * ratio - 2.0 * x * ratio * ratio).exp() - (-4.0 * x * ratio - 2.0 * x * ratio * ratio).exp());
    let theta = tan.atan();
    // ln g = -2x + ln sqrt(1 + tan^2)
    let ln_g = -2.0 * x + 0.5 * tan.mul_add(tan, 1.0).ln();
    let t_eff = if ln_g < 0.0 { -2.0 * tau / ln_g } else { f64::INFINITY };
    Ok(TwoQubitAnalytic { tau, mu_ratio: ratio, t_triv, theta, g: ln_g.exp(), t_eff })
}

/// Maximize the analytic `T_eff` over `tau`: a log-spaced scan of
/// `[1e-4, 1e2] t_triv` refined by golden section. Returns `(tau, t_eff)`.
pub fn analytic_optimum(mu1: f64, mu2: f64, t_triv: f64) -> Result<(f64, f64)> {
    let f = |u: f64| analytic_two_qubit(u.exp() * t_triv, mu1, mu2, t_triv).map(|p| p.t_eff).unwrap_or(0.0);
    let (lo, hi) = (1e-4f64.ln(), 1e2f64.ln());
    let n = 400;
    let h = (hi - lo) / n as f64;
    let i = (0..=n).max_by(|&a, &b| f(lo + a as f64 * h).total_cmp(&f(lo + b as f64 * h))).unwrap();
    let best = lo + i as f64 * h;
    // A maximum at the long-idle edge means T_eff keeps growing with tau.
    if i == n || f(best).is_infinite() {
        return Err(QffError::DecayInfinite);
    }
    let (u, v) = golden_section(|u| -f(u), best - h, best + h, 1e-10);
    Ok((u.exp() * t_triv, -v))
}
