//! Lockstep batched rollouts: all trajectories advance one time step
//! together so the policy network runs one batched forward pass per step.
//! Trajectory `i` uses seed `base_seed + i` for measurement outcomes
//! (stream 0) and action sampling (stream 1), so results do not depend on
//! thread count or scheduling.

use super::policy::BatchPolicy;
use crate::error::{QffError, Result};
use crate::nn::MlpCache;
use crate::reward::discounted;
use crate::scenario::{EpisodeState, Environment, TrajectoryRow};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Batch of `n` complete episodes; per-step arrays are time-major
/// (`row = t * n + i`).
#[derive(Clone, Debug)]
pub struct Rollouts {
    pub n: usize,
    pub horizon: usize,
    pub n_actions: usize,
    pub cache: Option<MlpCache>,
    pub probs: Vec<f64>,
    pub actions: Vec<usize>,
    pub outcomes: Vec<Option<usize>>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub r_recov: Vec<f64>,
    pub destructive: Vec<bool>,
    pub rq_final: Vec<f64>,
    pub logs: Vec<Vec<TrajectoryRow>>,
    pub final_states: Vec<EpisodeState>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RolloutOptions {
    pub keep_cache: bool,
    pub record_logs: bool,
    pub keep_final_states: bool,
}

pub(crate) fn policy_rng(seed: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(1);
    r
}

/// Inverse-CDF draw from one probability row.
pub(crate) fn sample_action(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (a, &x) in p.iter().enumerate() {
        if x <= 0.0 {
            continue;
        }
        acc += x;
        last = a;
        if u < acc {
            return a;
        }
    }
    last
}

fn concat_caches(parts: Vec<MlpCache>) -> Option<MlpCache> {
    let mut it = parts.into_iter();
    let mut acc = it.next()?;
    for c in it {
        acc.n += c.n;
        for (a, b) in acc.acts.iter_mut().zip(c.acts) {
            a.extend(b);
        }
        acc.logits.extend(c.logits);
        acc.probs.extend(c.probs);
    }
    Some(acc)
}

impl Rollouts {
    pub fn row(&self, t: usize, i: usize) -> usize {
        t * self.n + i
    }

    /// Per-trajectory returns (time-major) combining the protection and
    /// recovery rewards: `(1-γ) Σ γ^k (r1 + r_recov)_{t+k} + r2_t`.
    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        let (n, horizon) = (self.n, self.horizon);
        let mut out = vec![0.0; n * horizon];
        for i in 0..n {
            let r: Vec<f64> = (0..horizon).map(|t| self.r1[t * n + i] + self.r_recov[t * n + i]).collect();
            for (t, v) in discounted(&r, gamma).into_iter().enumerate() {
                out[t * n + i] = v + self.r2[t * n + i];
            }
        }
        out
    }

    pub fn mean_rq_final(&self) -> f64 {
        self.rq_final.iter().sum::<f64>() / self.n as f64
    }

    /// Destructive measurements per step.
    pub fn destructive_rate(&self) -> f64 {
        self.destructive.iter().filter(|&&d| d).count() as f64 / self.destructive.len() as f64
    }

    pub fn action_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.n_actions];
        for &a in &self.actions {
            h[a] += 1;
        }
        h
    }
}

/// Sample `n` episodes with `policy` on `env`.
pub fn rollout_batch<P: BatchPolicy + ?Sized>(
    policy: &P,
    env: &Environment,
    n: usize,
    base_seed: u64,
    opts: RolloutOptions,
) -> Result<Rollouts> {
    if policy.n_actions() != env.n_actions() {
        return Err(QffError::Shape(format!("policy has {} actions, scenario {}", policy.n_actions(), env.n_actions())));
    }
    let d = env.observation_len();
    if let Some(m) = policy.input_size().filter(|&m| m != d) {
        return Err(QffError::Shape(format!("policy expects {m} inputs, observation has {d}")));
    }
    let horizon = env.horizon();
    let a_n = env.n_actions();
    let mut states: Vec<(EpisodeState, ChaCha8Rng)> = (0..n as u64)
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let mut s = env.reset(seed);
            s.record = opts.record_logs;
            (s, policy_rng(seed))
        })
        .collect();
    let rows = n * horizon;
    let mut out = Rollouts {
        n,
        horizon,
        n_actions: a_n,
        cache: None,
        probs: Vec::with_capacity(rows * a_n),
        actions: Vec::with_capacity(rows),
        outcomes: Vec::with_capacity(rows),
        r1: Vec::with_capacity(rows),
        r2: Vec::with_capacity(rows),
        r_recov: Vec::with_capacity(rows),
        destructive: Vec::with_capacity(rows),
        rq_final: Vec::new(),
        logs: Vec::new(),
        final_states: Vec::new(),
    };
    let mut caches = Vec::new();
    let mut obs = vec![0.0; n * d];
    for t in 0..horizon {
        states
            .par_iter()
            .zip(obs.par_chunks_mut(d))
            .try_for_each(|((s, _), row)| env.observe(s).map(|o| o.write_into(row)))?;
        let (probs, cache) = policy.probs(&obs, n, t)?;
        if probs.len() != n * a_n || probs.iter().any(|p| !p.is_finite()) {
            return Err(QffError::NonFinite(format!("policy output at step {t}")));
        }
        let steps: Vec<_> = states
            .par_iter_mut()
            .zip(probs.par_chunks(a_n))
            .map(|((s, rng), p)| {
                let a = sample_action(p, rng);
                env.apply(s, a).map(|o| (a, o))
            })
            .collect::<Result<_>>()?;
        for (a, o) in steps {
            out.actions.push(a);
            out.outcomes.push(o.outcome);
            out.r1.push(o.r1);
            out.r2.push(o.r2);
            out.r_recov.push(o.r_recov);
            out.destructive.push(o.destructive);
        }
        out.probs.extend_from_slice(&probs);
        if opts.keep_cache {
            caches.push(cache.ok_or_else(|| QffError::Config("policy is not differentiable".into()))?);
        }
    }
    out.cache = concat_caches(caches);
    out.rq_final = states.iter().map(|(s, _)| s.rq).collect();
    if opts.record_logs {
        out.logs = states.iter_mut().map(|(s, _)| std::mem::take(&mut s.log)).collect();
    }
    if opts.keep_final_states {
        out.final_states = states.into_iter().map(|(s, _)| s).collect();
    }
    Ok(out)
}

/// Mean return per time step over the batch.
pub fn mean_returns(returns: &[f64], n: usize) -> Vec<f64> {
    returns.chunks(n).map(|c| c.iter().sum::<f64>() / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mlp;
    use crate::reward::RewardConfig;
    use crate::rl::policy::ScriptedPolicy;
    use crate::scenario::{preset, Environment};

    fn short_env(horizon: usize) -> Environment {
        let mut cfg = preset("all-to-all").unwrap();
        cfg.horizon = horizon;
        Environment::from_config(&cfg, RewardConfig::default()).unwrap()
    }

    #[test]
    fn uniform_policy_frequencies() {
        let env = short_env(10);
        let m = Mlp::zeros(&[env.observation_len(), 4, 21]).unwrap();
        let r = rollout_batch(&m, &env, 10_000, 1, RolloutOptions::default()).unwrap();
        let h = r.action_histogram();
        let total = r.actions.len() as f64;
        assert_eq!(total, 1e5);
        let p = 1.0 / 21.0;
        let sigma = (total * p * (1.0 - p)).sqrt();
        for &c in &h {
            assert!((c as f64 - total * p).abs() < 3.0 * sigma, "{h:?}");
        }
    }

    #[test]
    fn input_size_mismatch_rejected() {
        let env = short_env(5);
        let m = Mlp::zeros(&[10, 21]).unwrap();
        assert!(matches!(rollout_batch(&m, &env, 2, 0, RolloutOptions::default()), Err(QffError::Shape(_))));
    }

    #[test]
    fn deterministic_policy_repeats_actions() {
        let env = short_env(12);
        let s = ScriptedPolicy::new(21, vec![0, 1], vec![2, 3, 13]).unwrap();
        let r = rollout_batch(&s, &env, 4, 0, RolloutOptions::default()).unwrap();
        for t in 0..12 {
            let a: Vec<usize> = (0..4).map(|i| r.actions[r.row(t, i)]).collect();
            assert!(a.iter().all(|&x| x == s.action_at(t)));
        }
    }

    #[test]
    fn seeds_are_order_independent() {
        let env = short_env(15);
        let m = Mlp::init(&[env.observation_len(), 8, 21], 3).unwrap();
        let big = rollout_batch(&m, &env, 6, 100, RolloutOptions { record_logs: true, ..Default::default() }).unwrap();
        let tail = rollout_batch(&m, &env, 3, 103, RolloutOptions { record_logs: true, ..Default::default() }).unwrap();
        assert_eq!(big.logs[3..], tail.logs[..]);
        let again = rollout_batch(&m, &env, 6, 100, RolloutOptions { record_logs: true, ..Default::default() }).unwrap();
        assert_eq!(big.logs, again.logs);
    }

    #[test]
    fn returns_recomputable_and_cache_complete() {
        let env = short_env(8);
        let m = Mlp::init(&[env.observation_len(), 8, 21], 4).unwrap();
        let r = rollout_batch(&m, &env, 3, 7, RolloutOptions { keep_cache: true, ..Default::default() }).unwrap();
        assert_eq!(r.cache.as_ref().unwrap().n, 24);
        let ret = r.returns(0.95);
        for i in 0..3 {
            let r1: Vec<f64> = (0..8).map(|t| r.r1[r.row(t, i)]).collect();
            let r2: Vec<f64> = (0..8).map(|t| r.r2[r.row(t, i)]).collect();
            let want = crate::reward::protection_return(&r1, &r2, 0.95);
            for t in 0..8 {
                assert!((ret[r.row(t, i)] - want[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn encode_and_parity_beats_trivial() {
        let env = short_env(200);
        let idx = |a| env.actions.index_of(&a).unwrap();
        use crate::action::{Action, Axis};
        let c = |a, b| idx(Action::Cnot { control: a, target: b });
        let m3 = idx(Action::Measure { qubit: 3, axis: Axis::Z });
        let s = ScriptedPolicy::new(21, vec![c(0, 1), c(0, 2)], vec![c(0, 3), c(1, 3), m3, c(1, 3), c(2, 3), m3]).unwrap();
        let r = rollout_batch(&s, &env, 16, 0, RolloutOptions::default()).unwrap();
        assert!(r.mean_rq_final() > (-1.0f64 / 3.0).exp());
        assert_eq!(r.destructive_rate(), 0.0);
    }
}
