//! Evaluation reports and hidden-layer activation export for trained or
//! scripted policies.

use super::distill::student_input;
use super::policy::{BatchPolicy, ScriptedPolicy};
use super::rollout::{rollout_batch, RolloutOptions};
use crate::error::{QffError, Result};
use crate::metrics::overlap_worst_case;
use crate::nn::lstm::LAYERS;
use crate::nn::{Checkpoint, Lstm, Mlp};
use crate::scenario::Environment;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

/// Episodes simulated at once.
const CHUNK: usize = 500;
/// Relative spread between the half-time and full-time decay estimates
/// above which the decay is reported as non-exponential.
pub const EXPONENTIAL_TOLERANCE: f64 = 0.1;

/// Any policy that can be loaded from disk.
#[derive(Clone, Debug)]
pub enum LoadedPolicy {
    Network(Mlp),
    Scripted(ScriptedPolicy),
    Student(Lstm),
}

impl LoadedPolicy {
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let arch = ck.architecture.as_str();
        if arch.starts_with("mlp:") {
            Ok(Self::Network(Mlp::from_checkpoint(ck)?))
        } else if arch.starts_with("lstm:") {
            Ok(Self::Student(Lstm::from_checkpoint(ck)?))
        } else if arch.starts_with("scripted:") {
            Ok(Self::Scripted(ScriptedPolicy::parse(arch)?))
        } else {
            Err(QffError::Checkpoint(format!("unknown architecture '{arch}'")))
        }
    }

    /// A checkpoint path, or an inline `scripted:periodic:...` description.
    pub fn load(spec: &str) -> Result<Self> {
        if spec.starts_with("scripted:") {
            return Ok(Self::Scripted(ScriptedPolicy::parse(spec)?));
        }
        Self::from_checkpoint(&Checkpoint::load(Path::new(spec))?)
    }

    pub fn architecture(&self) -> String {
        match self {
            Self::Network(m) => m.architecture(),
            Self::Scripted(s) => s.architecture(),
            Self::Student(l) => l.architecture(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Self::Network(m) => m.output_size(),
            Self::Scripted(s) => s.n_actions,
            Self::Student(l) => l.output,
        }
    }

    /// Reject policies whose input or output sizes do not fit the scenario.
    pub fn check_compatible(&self, env: &Environment) -> Result<()> {
        let a = env.n_actions();
        if self.n_actions() != a {
            return Err(QffError::Shape(format!(
                "policy {} has {} actions, scenario has {a}",
                self.architecture(),
                self.n_actions()
            )));
        }
        let (want, have) = match self {
            Self::Network(m) => (m.input_size(), env.observation_len()),
            Self::Student(l) => (l.input, super::distill::student_input_len(env)),
            Self::Scripted(_) => return Ok(()),
        };
        if want != have {
            return Err(QffError::Shape(format!("policy {} expects {want} inputs, scenario provides {have}", self.architecture())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ActionCount {
    pub index: usize,
    pub action: String,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvaluationReport {
    pub policy: String,
    pub episodes: usize,
    pub horizon: usize,
    pub mean_rq_final: f64,
    pub rq_final_std_error: f64,
    /// Mean R_Q at half the horizon.
    pub mean_rq_half: f64,
    pub t_eff: Option<f64>,
    pub t_eff_over_t_dec: Option<f64>,
    pub t_eff_over_t_single: Option<f64>,
    /// Whether the half-time and full-time decay estimates agree.
    pub exponential_decay: bool,
    pub note: Option<String>,
    pub mean_overlap: f64,
    pub destructive_rate: f64,
    pub action_histogram: Vec<ActionCount>,
}

#[derive(Default)]
struct Tally {
    rq_final: Vec<f64>,
    rq_half: Vec<f64>,
    overlap: Vec<f64>,
    destructive: usize,
    steps: usize,
    hist: Vec<usize>,
}

impl Tally {
    fn new(a: usize) -> Self {
        Self { hist: vec![0; a], ..Default::default() }
    }
}

fn half_index(horizon: usize) -> usize {
    (horizon / 2).max(1) - 1
}

fn decay_time(rq: f64, time: f64) -> Option<f64> {
    crate::metrics::effective_decay_time(rq, time).ok()
}

/// Evaluate over `episodes` episodes seeded `seed, seed + 1, ...`.
///
/// Feedforward and scripted policies sample their actions; the recurrent
/// student acts greedily.
pub fn evaluate_policy(policy: &LoadedPolicy, env: &Environment, episodes: usize, seed: u64) -> Result<EvaluationReport> {
    if episodes == 0 {
        return Err(QffError::InvalidParameter("evaluation needs at least one episode".into()));
    }
    policy.check_compatible(env)?;
    let horizon = env.horizon();
    if horizon == 0 {
        return Err(QffError::InvalidParameter("evaluation needs a positive horizon".into()));
    }
    let mut tally = Tally::new(env.n_actions());
    let mut done = 0;
    while done < episodes {
        let n = CHUNK.min(episodes - done);
        let base = seed.wrapping_add(done as u64);
        match policy {
            LoadedPolicy::Network(m) => batch_chunk(m, env, n, base, &mut tally)?,
            LoadedPolicy::Scripted(s) => batch_chunk(s, env, n, base, &mut tally)?,
            LoadedPolicy::Student(l) => student_chunk(l, env, n, base, &mut tally)?,
        }
        done += n;
    }
    let e = episodes as f64;
    let mean = tally.rq_final.iter().sum::<f64>() / e;
    let var = tally.rq_final.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (e - 1.0).max(1.0);
    let half = tally.rq_half.iter().sum::<f64>() / e;
    let dt = env.spec.dt;
    let t_eff = decay_time(mean, horizon as f64 * dt);
    let t_half = decay_time(half, (half_index(horizon) + 1) as f64 * dt);
    let (exponential, note) = match (t_eff, t_half) {
        (Some(a), Some(b)) if ((b / a) - 1.0).abs() <= EXPONENTIAL_TOLERANCE => (true, None),
        (Some(a), Some(b)) => (
            false,
            Some(format!("decay is not exponential: T_eff is {b:.4e} at half time and {a:.4e} at the horizon, so T_eff is ill-defined")),
        ),
        (None, _) => (false, Some(format!("T_eff undefined for mean final R_Q {mean:.6}"))),
        (Some(_), None) => (false, Some(format!("T_eff undefined at half time (mean R_Q {half:.6})"))),
    };
    let t_single = env.reward.t_single;
    Ok(EvaluationReport {
        policy: policy.architecture(),
        episodes,
        horizon,
        mean_rq_final: mean,
        rq_final_std_error: (var / e).sqrt(),
        mean_rq_half: half,
        t_eff,
        t_eff_over_t_dec: t_eff.map(|t| t / env.spec.t_dec),
        t_eff_over_t_single: t_eff.map(|t| t / t_single),
        exponential_decay: exponential,
        note,
        mean_overlap: tally.overlap.iter().sum::<f64>() / e,
        destructive_rate: tally.destructive as f64 / tally.steps as f64,
        action_histogram: tally
            .hist
            .iter()
            .enumerate()
            .map(|(i, &count)| ActionCount { index: i, action: env.actions.actions[i].to_string(), count })
            .collect(),
    })
}

fn batch_chunk<P: BatchPolicy>(policy: &P, env: &Environment, n: usize, base: u64, tally: &mut Tally) -> Result<()> {
    let opts = RolloutOptions { keep_cache: false, record_logs: true, keep_final_states: true };
    let ro = rollout_batch(policy, env, n, base, opts)?;
    let hi = half_index(ro.horizon);
    tally.rq_final.extend(&ro.rq_final);
    tally.rq_half.extend(ro.logs.iter().map(|l| l[hi].rq));
    tally.destructive += ro.destructive.iter().filter(|&&d| d).count();
    tally.steps += ro.destructive.len();
    for (h, c) in tally.hist.iter_mut().zip(ro.action_histogram()) {
        *h += c;
    }
    let target = env.spec.target_qubit;
    let overlaps: Vec<f64> =
        ro.final_states.par_iter().map(|s| overlap_worst_case(&s.frame.to_dense(), target)).collect::<Result<_>>()?;
    tally.overlap.extend(overlaps);
    Ok(())
}

fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().fold(0, |best, (i, &v)| if v > p[best] { i } else { best })
}

/// Greedy closed-loop run of the student; calls `visit(t, actions, top_hidden)`
/// after every step.
fn run_student(
    student: &Lstm,
    env: &Environment,
    n: usize,
    base: u64,
    mut visit: impl FnMut(usize, &[usize], &[f64], &[crate::scenario::StepOutcome]),
) -> Result<Vec<crate::scenario::EpisodeState>> {
    let a_n = env.n_actions();
    let mut states: Vec<_> = (0..n as u64).map(|i| env.reset(base.wrapping_add(i))).collect();
    let mut prev: Vec<Option<(usize, Option<usize>)>> = vec![None; n];
    let mut lstm = student.initial_state(n);
    for t in 0..env.horizon() {
        let x: Vec<f64> = prev.iter().flat_map(|p| student_input(env, *p)).collect();
        let probs = student.step(&mut lstm, &x)?;
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(QffError::NonFinite(format!("student output at step {t}")));
        }
        let chosen: Vec<usize> = probs.chunks(a_n).map(argmax).collect();
        let outs: Vec<_> = states.par_iter_mut().zip(&chosen).map(|(s, &a)| env.apply(s, a)).collect::<Result<_>>()?;
        visit(t, &chosen, &lstm.h[LAYERS - 1], &outs);
        for ((p, &a), o) in prev.iter_mut().zip(&chosen).zip(outs) {
            *p = Some((a, o.outcome));
        }
    }
    Ok(states)
}

fn student_chunk(student: &Lstm, env: &Environment, n: usize, base: u64, tally: &mut Tally) -> Result<()> {
    let hi = half_index(env.horizon());
    let mut half = vec![0.0; n];
    let mut destructive = 0;
    let mut hist = vec![0; env.n_actions()];
    let states = run_student(student, env, n, base, |t, chosen, _, outs| {
        for (a, o) in chosen.iter().zip(outs) {
            hist[*a] += 1;
            destructive += usize::from(o.destructive);
        }
        if t == hi {
            for (h, o) in half.iter_mut().zip(outs) {
                *h = o.rq;
            }
        }
    })?;
    tally.rq_final.extend(states.iter().map(|s| s.rq));
    tally.rq_half.extend(half);
    tally.destructive += destructive;
    tally.steps += n * env.horizon();
    for (h, c) in tally.hist.iter_mut().zip(hist) {
        *h += c;
    }
    let target = env.spec.target_qubit;
    let overlaps: Vec<f64> =
        states.par_iter().map(|s| overlap_worst_case(&s.frame.to_dense(), target)).collect::<Result<_>>()?;
    tally.overlap.extend(overlaps);
    Ok(())
}

/// Last-hidden-layer activations at one visited step.
#[derive(Clone, Debug, Serialize)]
pub struct ActivationRow {
    pub episode: usize,
    pub step: usize,
    pub action: usize,
    pub activations: Vec<f64>,
}

/// Activations of the last hidden layer along `episodes` episodes, ordered
/// by episode and then step.
pub fn export_activations(policy: &LoadedPolicy, env: &Environment, episodes: usize, seed: u64) -> Result<Vec<ActivationRow>> {
    policy.check_compatible(env)?;
    let horizon = env.horizon();
    let mut rows = Vec::with_capacity(episodes * horizon);
    let mut done = 0;
    while done < episodes {
        let n = CHUNK.min(episodes - done);
        let base = seed.wrapping_add(done as u64);
        let mut chunk: Vec<Vec<ActivationRow>> = (0..n).map(|_| Vec::with_capacity(horizon)).collect();
        match policy {
            LoadedPolicy::Network(m) => {
                let opts = RolloutOptions { keep_cache: true, ..Default::default() };
                let ro = rollout_batch(m, env, n, base, opts)?;
                let cache = ro.cache.as_ref().expect("cache kept");
                for t in 0..horizon {
                    for (i, ep) in chunk.iter_mut().enumerate() {
                        let r = ro.row(t, i);
                        ep.push(ActivationRow {
                            episode: done + i,
                            step: t,
                            action: ro.actions[r],
                            activations: cache.last_hidden(r).to_vec(),
                        });
                    }
                }
            }
            LoadedPolicy::Student(l) => {
                let h = l.hidden;
                run_student(l, env, n, base, |t, chosen, top, _| {
                    for (i, ep) in chunk.iter_mut().enumerate() {
                        ep.push(ActivationRow {
                            episode: done + i,
                            step: t,
                            action: chosen[i],
                            activations: top[i * h..(i + 1) * h].to_vec(),
                        });
                    }
                })?;
            }
            LoadedPolicy::Scripted(_) => {
                return Err(QffError::Unsupported("scripted policies have no hidden layer".into()));
            }
        }
        rows.extend(chunk.into_iter().flatten());
        done += n;
    }
    Ok(rows)
}
