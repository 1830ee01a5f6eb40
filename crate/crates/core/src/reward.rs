//! Protection and recovery rewards, discounted returns and the
//! time-dependent baseline.

use serde::{Deserialize, Serialize};

/// Values at or below this count as zero in the reward case analysis.
pub const ZERO_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub gamma: f64,
    pub kappa: f64,
    pub punish: f64,
    pub beta_dec: f64,
    pub beta_corr: f64,
    pub rq_floor: f64,
    /// Trivial decay time; filled from the scenario when zero.
    pub t_single: f64,
    pub dt: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { gamma: 0.95, kappa: 0.9, punish: 0.1, beta_dec: 20.0, beta_corr: 10.0, rq_floor: 0.1, t_single: 0.0, dt: 1.0 }
    }
}

/// `(r1, r2)` for one step from `R_Q(t)`, `R̄_Q(t)` and `R̄_Q(t+1)`.
pub fn protection_reward(rq_t: f64, rq_bar_t: f64, rq_bar_next: f64, cfg: &RewardConfig) -> (f64, f64) {
    if rq_bar_next > ZERO_THRESHOLD {
        let scale = 2.0 * cfg.dt / cfg.t_single;
        // Without decoherence there is nothing to normalize against.
        let gain = if scale > 0.0 { (rq_bar_next - rq_t) / scale } else { 0.0 };
        (1.0 + gain, 0.0)
    } else if rq_bar_t > ZERO_THRESHOLD {
        (0.0, -cfg.punish)
    } else {
        (0.0, 0.0)
    }
}

/// `R_t = (1-γ) Σ_k γ^k r1_{t+k} + r2_t`.
pub fn protection_return(r1: &[f64], r2: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = discounted(r1, gamma);
    for (o, &b) in out.iter_mut().zip(r2) {
        *o += b;
    }
    out
}

/// `(1-γ) Σ_k γ^k r_{t+k}` for every `t`.
pub fn discounted(r: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; r.len()];
    let mut acc = 0.0;
    for t in (0..r.len()).rev() {
        acc = r[t] + gamma * acc;
        out[t] = (1.0 - gamma) * acc;
    }
    out
}

/// Decoding score `D_t`: +1/2 per correctly placed qubit, -1/2 per wrong one
/// (information wanted on `target` only). Zero outside the decoding window
/// or once the information has mostly decayed.
pub fn decoding_score(flags: &[bool], rq: f64, t: usize, t_signal: usize, target: usize, rq_floor: f64) -> f64 {
    if t <= t_signal || rq < rq_floor {
        return 0.0;
    }
    let ind = |q: usize| if flags[q] { 1.0 } else { -1.0 };
    let others: f64 = (0..flags.len()).filter(|&q| q != target).map(ind).sum();
    0.5 * (ind(target) - others)
}

/// Final-state correction indicator: information only on the target and a
/// positive worst-case decoding quality.
pub fn correction_indicator(flags: &[bool], target: usize, overlap: f64) -> bool {
    flags.iter().enumerate().all(|(q, &f)| f == (q == target)) && overlap > 0.5 + ZERO_THRESHOLD
}

/// Recovery reward for the action taken at step `t`.
///
/// Rewards start once the window has opened (`t > t_signal`); the
/// correction bonus is paid on the final step.
pub fn recovery_reward(d_t: f64, d_next: f64, t: usize, horizon: usize, t_signal: usize, corrected: bool, cfg: &RewardConfig) -> f64 {
    if t <= t_signal {
        return 0.0;
    }
    let mut r = cfg.beta_dec * (d_next - d_t);
    if t + 1 == horizon && corrected {
        r += cfg.beta_corr;
    }
    r
}

/// Exponentially decaying average of past per-step mean returns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineStore {
    pub b: Vec<f64>,
    pub epochs: u64,
}

impl BaselineStore {
    pub fn new(horizon: usize) -> Self {
        Self { b: vec![0.0; horizon], epochs: 0 }
    }

    /// `b_t <- κ b_t + (1-κ) R̄_t`.
    pub fn update(&mut self, mean_returns: &[f64], kappa: f64) {
        assert_eq!(mean_returns.len(), self.b.len(), "baseline length mismatch");
        for (b, &r) in self.b.iter_mut().zip(mean_returns) {
            *b = kappa * *b + (1.0 - kappa) * r;
        }
        self.epochs += 1;
    }
}

pub fn baseline_update(mut store: BaselineStore, mean_returns: &[f64], kappa: f64) -> BaselineStore {
    store.update(mean_returns, kappa);
    store
}
