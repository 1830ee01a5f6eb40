//! Episodic environment over a [`HardwareSpec`]: reset, observation assembly
//! and stepping on either the dense or the stabilizer backend.

use super::config::{build_action_set, ActionSet, BackendChoice, HardwareSpec, ScenarioConfig};
use crate::action::{Action, Axis};
use crate::chz::{chz_step, ChzFrame, ChzNoise};
use crate::error::{QffError, Result};
use crate::linalg::{hermitian_eigen, CMat, C64};
use crate::metrics::{overlap_worst_case, qubit_info_flags, recoverable_q_info, RqMethod};
use crate::qmem::{build_generator, measurement_bias, sample_index, step_maps_with, CPBranch, LogicalFrame, MIN_BRANCH_PROBABILITY};
use crate::reward::{correction_indicator, decoding_score, protection_reward, recovery_reward, RewardConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::sync::OnceLock;

/// Eigenvalues closer than this are treated as degenerate when ordering PCA components.
const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum Frame {
    Dense(LogicalFrame),
    Chz(ChzFrame),
}

impl Frame {
    pub fn to_dense(&self) -> LogicalFrame {
        match self {
            Frame::Dense(f) => f.clone(),
            Frame::Chz(c) => c.to_dense(),
        }
    }

    pub fn is_chz(&self) -> bool {
        matches!(self, Frame::Chz(_))
    }

    pub fn rq(&self, method: RqMethod) -> Result<f64> {
        match self {
            Frame::Dense(f) => Ok(recoverable_q_info(f, method)?.0),
            Frame::Chz(c) => Ok(c.recoverable_q_info().0),
        }
    }

    pub fn qubit_flags(&self) -> Vec<bool> {
        match self {
            Frame::Dense(f) => qubit_info_flags(f),
            Frame::Chz(c) => c.qubit_info_flags(),
        }
    }

    /// Whether measuring with `action` would reveal logical information.
    pub fn is_destructive(&self, action: &Action) -> Result<bool> {
        match (self, action) {
            (Frame::Chz(c), Action::Measure { qubit, axis: Axis::Z }) => Ok(c.measurement_bias(*qubit).1),
            (Frame::Chz(c), _) => Ok(measurement_bias(&c.to_dense(), action)?.1),
            (Frame::Dense(f), _) => Ok(measurement_bias(f, action)?.1),
        }
    }
}

/// One possible successor of a step.
#[derive(Clone, Debug)]
pub struct Successor {
    pub outcome: Option<usize>,
    pub probability: f64,
    /// `None` below the sampling cutoff.
    pub frame: Option<Frame>,
    pub rq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub action: String,
    pub outcome: String,
    pub p: f64,
    pub rq: f64,
    pub rq_expected: f64,
    pub r1: f64,
    pub r2: f64,
    pub r_recov: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub action: usize,
    pub outcome: Option<usize>,
    pub label: &'static str,
    pub probability: f64,
    pub rq: f64,
    pub rq_expected: f64,
    pub destructive: bool,
    pub r1: f64,
    pub r2: f64,
    pub r_recov: f64,
    pub terminal: bool,
}

#[derive(Clone, Debug)]
pub struct EpisodeState {
    pub frame: Frame,
    pub t: usize,
    pub prev_action: Option<usize>,
    pub rng: ChaCha8Rng,
    /// `R_Q(t)` and `R̄_Q(t)` of the current frame.
    pub rq: f64,
    pub rq_bar: f64,
    /// Decoding score `D_t`.
    pub decode_score: f64,
    pub log: Vec<TrajectoryRow>,
    pub record: bool,
}

impl EpisodeState {
    pub fn is_terminal(&self, horizon: usize) -> bool {
        self.t >= horizon
    }
}

/// Network input for one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub pca_block: Vec<f64>,
    pub destructive_flags: Vec<bool>,
    pub prev_action: Option<usize>,
    pub n_actions: usize,
    pub countdown: Option<usize>,
    pub decode_window: usize,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.pca_block.len() + self.destructive_flags.len() + self.n_actions + self.decode_window
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.len(), "observation buffer length");
        let p = self.pca_block.len();
        out[..p].copy_from_slice(&self.pca_block);
        let mut i = p;
        for &f in &self.destructive_flags {
            out[i] = if f { 1.0 } else { 0.0 };
            i += 1;
        }
        out[i..i + self.n_actions].fill(0.0);
        if let Some(a) = self.prev_action {
            out[i + a] = 1.0;
        }
        i += self.n_actions;
        out[i..].fill(0.0);
        if let Some(c) = self.countdown {
            out[i + c] = 1.0;
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        self.write_into(&mut v);
        v
    }
}

/// Multiply by a phase making the largest-magnitude entry real positive.
fn fix_phase(v: &mut [C64]) {
    let mut best = 0;
    for (i, c) in v.iter().enumerate() {
        if c.norm() > v[best].norm() + 1e-12 {
            best = i;
        }
    }
    let m = v[best].norm();
    if m == 0.0 {
        return;
    }
    let phase = v[best].conj() / m;
    for c in v.iter_mut() {
        *c *= phase;
    }
}

fn lexicographic(a: &[C64], b: &[C64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Sort by descending eigenvalue; degenerate groups by the phase-fixed
/// vectors (larger entries first).
fn order_components(comps: &mut [(f64, Vec<C64>)]) {
    comps.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut start = 0;
    while start < comps.len() {
        let mut end = start + 1;
        while end < comps.len() && (comps[start].0 - comps[end].0).abs() <= DEGENERACY_TOL {
            end += 1;
        }
        comps[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        start = end;
    }
}

fn push_components(out: &mut Vec<f64>, comps: &[(f64, Vec<C64>)], k: usize, d: usize) {
    for i in 0..k {
        match comps.get(i) {
            Some((p, v)) if *p > 0.0 => {
                let s = p.sqrt();
                for c in v {
                    out.push(s * c.re);
                    out.push(s * c.im);
                }
            }
            _ => out.extend(std::iter::repeat_n(0.0, 2 * d)),
        }
    }
}

/// The `k` leading scaled eigenvectors of `rho0` and `rho0 + delta_j`,
/// real and imaginary parts interleaved.
pub fn pca_block(frame: &Frame, k: usize) -> Result<Vec<f64>> {
    let n = match frame {
        Frame::Dense(f) => f.n_qubits,
        Frame::Chz(c) => c.n_qubits,
    };
    let d = 1usize << n;
    if k == 0 || k > d {
        return Err(QffError::InvalidParameter(format!("PCA components {k} outside 1..={d}")));
    }
    let mut out = Vec::with_capacity(8 * k * d);
    for m in 0..4 {
        let mut comps: Vec<(f64, Vec<C64>)> = match frame {
            Frame::Dense(f) => {
                let mat: CMat = if m == 0 { f.rho0.clone() } else { &f.rho0 + &f.delta[m - 1] };
                let (vals, vecs) = hermitian_eigen(&mat);
                (0..d)
                    .rev()
                    .map(|c| {
                        let mut v: Vec<C64> = vecs.column(c).iter().copied().collect();
                        fix_phase(&mut v);
                        (vals[c], v)
                    })
                    .collect()
            }
            Frame::Chz(c) => {
                let mut pairs = c.eigenpairs(m);
                pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
                // Only positive components inside the kept window (plus ties) need vectors.
                let cutoff = pairs[k - 1].0 - DEGENERACY_TOL;
                pairs
                    .into_iter()
                    .filter(|(p, _, _)| *p > 0.0 && *p >= cutoff)
                    .map(|(p, s, axis)| {
                        let mut v = axis.eigenvector(s, n);
                        fix_phase(&mut v);
                        (p, v)
                    })
                    .collect()
            }
        };
        order_components(&mut comps);
        push_components(&mut out, &comps, k, d);
    }
    Ok(out)
}

/// Shared, immutable environment definition.
pub struct Environment {
    pub spec: HardwareSpec,
    pub actions: ActionSet,
    pub reward: RewardConfig,
    pub rq_method: RqMethod,
    generator: crate::qmem::NoiseGenerator,
    chz_noise: Option<ChzNoise>,
    tables: OnceLock<Vec<Vec<CPBranch>>>,
}

impl Environment {
    /// `reward.t_single` and `reward.dt` are taken from the scenario when unset.
    pub fn new(spec: HardwareSpec, mut reward: RewardConfig) -> Result<Self> {
        let actions = build_action_set(&spec)?;
        let generator = build_generator(spec.noise_kind, spec.n_qubits, spec.t_dec, &spec.moments)?;
        if reward.t_single <= 0.0 {
            reward.t_single = generator.t_single();
        }
        reward.dt = spec.dt;
        let chz_noise = match spec.backend {
            BackendChoice::Dense => None,
            _ if spec.chz_eligible() => Some(ChzNoise::from_generator(&generator, spec.dt)?),
            _ => None,
        };
        let rq_method = spec.rq_method();
        Ok(Self { spec, actions, reward, rq_method, generator, chz_noise, tables: OnceLock::new() })
    }

    pub fn from_config(cfg: &ScenarioConfig, reward: RewardConfig) -> Result<Self> {
        Self::new(HardwareSpec::from_config(cfg)?, reward)
    }

    pub fn uses_chz(&self) -> bool {
        self.chz_noise.is_some()
    }

    pub fn backend_name(&self) -> &'static str {
        if self.uses_chz() {
            "chz"
        } else {
            "dense"
        }
    }

    /// Final R_Q of an unprotected logical qubit, `exp(-2 T dt / T_single)`.
    pub fn trivial_rq_final(&self) -> f64 {
        (-2.0 * self.spec.horizon as f64 * self.spec.dt / self.reward.t_single).exp()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon
    }

    pub fn observation_len(&self) -> usize {
        let d = 1usize << self.spec.n_qubits;
        8 * self.spec.pca_components * d + self.actions.measurement_indices.len() + self.actions.len() + self.spec.decode_window
    }

    /// Dense branch maps per action, built on first use.
    pub fn tables(&self) -> &[Vec<CPBranch>] {
        self.tables.get_or_init(|| {
            let prop = self.generator.propagator(self.spec.dt);
            self.actions
                .actions
                .iter()
                .map(|a| step_maps_with(a, self.spec.n_qubits, &prop, self.spec.msmt_error).expect("validated action"))
                .collect()
        })
    }

    pub fn initial_frame(&self) -> Frame {
        match self.chz_noise {
            Some(_) => Frame::Chz(ChzFrame::initial(self.spec.n_qubits)),
            None => Frame::Dense(LogicalFrame::initial(self.spec.n_qubits)),
        }
    }

    pub fn reset(&self, seed: u64) -> EpisodeState {
        let frame = self.initial_frame();
        let rq = frame.rq(self.rq_method).expect("initial frame is finite");
        EpisodeState {
            frame,
            t: 0,
            prev_action: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rq,
            rq_bar: rq,
            decode_score: 0.0,
            log: Vec::new(),
            record: false,
        }
    }

    pub fn observe(&self, state: &EpisodeState) -> Result<Observation> {
        self.observe_with(state, self.spec.pca_components)
    }

    pub fn observe_with(&self, state: &EpisodeState, k: usize) -> Result<Observation> {
        let pca = pca_block(&state.frame, k)?;
        let flags = self
            .actions
            .measurement_indices
            .iter()
            .map(|&i| state.frame.is_destructive(&self.actions.actions[i]))
            .collect::<Result<Vec<_>>>()?;
        let t_signal = self.spec.t_signal();
        let countdown =
            (self.spec.decode_window > 0 && state.t >= t_signal && state.t < self.spec.horizon).then(|| state.t - t_signal);
        Ok(Observation {
            pca_block: pca,
            destructive_flags: flags,
            prev_action: state.prev_action,
            n_actions: self.actions.len(),
            countdown,
            decode_window: self.spec.decode_window,
        })
    }

    /// All successors of `frame` under action `a`, in outcome order.
    pub fn successors(&self, frame: &Frame, a: usize) -> Result<Vec<Successor>> {
        let action = self.actions.get(a).ok_or_else(|| QffError::InvalidAction(format!("action index {a} out of range")))?;
        if let (Frame::Chz(c), Some(noise)) = (frame, &self.chz_noise) {
            match chz_step(c, action, noise, self.spec.msmt_error) {
                Ok(branches) => {
                    return Ok(branches
                        .into_iter()
                        .map(|b| {
                            let rq = b.frame.as_ref().map_or(0.0, |f| f.recoverable_q_info().0);
                            Successor { outcome: b.outcome, probability: b.probability, frame: b.frame.map(Frame::Chz), rq }
                        })
                        .collect())
                }
                Err(QffError::Unsupported(_)) => return self.successors(&Frame::Dense(c.to_dense()), a),
                Err(e) => return Err(e),
            }
        }
        let dense = match frame {
            Frame::Dense(f) => std::borrow::Cow::Borrowed(f),
            Frame::Chz(c) => std::borrow::Cow::Owned(c.to_dense()),
        };
        let mut out = Vec::new();
        for b in &self.tables()[a] {
            let p = b.probability(&dense);
            if p < MIN_BRANCH_PROBABILITY {
                out.push(Successor { outcome: b.outcome, probability: p.max(0.0), frame: None, rq: 0.0 });
                continue;
            }
            let next = dense.evolve(b)?;
            let rq = recoverable_q_info(&next, self.rq_method)?.0;
            out.push(Successor { outcome: b.outcome, probability: p, frame: Some(Frame::Dense(next)), rq });
        }
        Ok(out)
    }

    /// Advance one step with action index `a`.
    pub fn apply(&self, state: &mut EpisodeState, a: usize) -> Result<StepOutcome> {
        let horizon = self.spec.horizon;
        if state.t >= horizon {
            return Err(QffError::Terminated);
        }
        let action = *self.actions.get(a).ok_or_else(|| QffError::InvalidAction(format!("action index {a} out of range")))?;
        let destructive = action.is_measurement() && state.frame.is_destructive(&action)?;
        let succ = self.successors(&state.frame, a)?;
        let probs: Vec<f64> = succ.iter().map(|s| s.probability).collect();
        let rq_expected: f64 = succ.iter().filter(|s| s.frame.is_some()).map(|s| s.probability * s.rq).sum();
        let (idx, p) = sample_index(&probs, &mut state.rng)?;
        let chosen = succ.into_iter().nth(idx).expect("sampled index in range");
        let frame = chosen.frame.ok_or(QffError::ZeroProbabilityBranch(p))?;
        let (r1, r2) = protection_reward(state.rq, state.rq_bar, rq_expected, &self.reward);
        let t = state.t;
        let mut r_recov = 0.0;
        let mut d_next = 0.0;
        if self.spec.decode_window > 0 {
            let t_signal = self.spec.t_signal();
            let need_flags = t + 1 > t_signal;
            let flags = if need_flags { frame.qubit_flags() } else { Vec::new() };
            if need_flags {
                d_next = decoding_score(&flags, chosen.rq, t + 1, t_signal, self.spec.target_qubit, self.reward.rq_floor);
            }
            let corrected = t + 1 == horizon && {
                let overlap = overlap_worst_case(&frame.to_dense(), self.spec.target_qubit)?;
                correction_indicator(&flags, self.spec.target_qubit, overlap)
            };
            r_recov = recovery_reward(state.decode_score, d_next, t, horizon, t_signal, corrected, &self.reward);
        }
        let label = chosen.outcome.map_or("unitary", |m| action.outcome_label(m));
        if state.record {
            state.log.push(TrajectoryRow {
                t,
                action: action.to_string(),
                outcome: label.to_string(),
                p,
                rq: chosen.rq,
                rq_expected,
                r1,
                r2,
                r_recov,
            });
        }
        state.frame = frame;
        state.rq = chosen.rq;
        state.rq_bar = rq_expected;
        state.decode_score = d_next;
        state.prev_action = Some(a);
        state.t += 1;
        Ok(StepOutcome {
            action: a,
            outcome: chosen.outcome,
            label,
            probability: p,
            rq: chosen.rq,
            rq_expected,
            destructive,
            r1,
            r2,
            r_recov,
            terminal: state.t >= horizon,
        })
    }
}

/// Serialize trajectory rows as JSON lines.
pub fn trajectory_jsonl(rows: &[TrajectoryRow]) -> String {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).expect("row serializes"));
        s.push('\n');
    }
    s
}
