//! Supervised distillation of a recurrent student that only sees its own
//! actions and the measurement outcomes.
//!
//! Student input at step `t` (length `A + M + 1`): a one-hot of the action
//! taken at `t - 1`, one neuron per measurement action carrying `+1` / `-1`
//! for outcome 0 / 1 of that measurement at `t - 1` (0 otherwise), and a
//! begin-of-time neuron set only at `t = 0`.

use super::config::DistillConfig;
use super::policy::Teacher;
use super::rollout::{rollout_batch, RolloutOptions, Rollouts};
use crate::error::{QffError, Result};
use crate::metrics::overlap_worst_case;
use crate::nn::{cross_entropy_loss, AdamState, Lstm};
use crate::scenario::Environment;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub fn student_input_len(env: &Environment) -> usize {
    env.n_actions() + env.actions.measurement_indices.len() + 1
}

/// Input vector given the previous step's action and outcome.
pub fn student_input(env: &Environment, prev: Option<(usize, Option<usize>)>) -> Vec<f64> {
    let a_n = env.n_actions();
    let mut x = vec![0.0; student_input_len(env)];
    match prev {
        None => x[a_n + env.actions.measurement_indices.len()] = 1.0,
        Some((a, outcome)) => {
            x[a] = 1.0;
            if let (Some(m), Some(o)) = (env.actions.measurement_indices.iter().position(|&i| i == a), outcome) {
                x[a_n + m] = if o == 0 { 1.0 } else { -1.0 };
            }
        }
    }
    x
}

/// One teacher episode: student inputs and teacher distributions per step.
#[derive(Clone, Debug)]
pub struct DistillRow {
    pub inputs: Vec<Vec<f64>>,
    pub teacher: Vec<Vec<f64>>,
}

fn rows_from(env: &Environment, ro: &Rollouts) -> Vec<DistillRow> {
    let a_n = ro.n_actions;
    (0..ro.n)
        .map(|i| {
            let mut prev = None;
            let mut inputs = Vec::with_capacity(ro.horizon);
            let mut teacher = Vec::with_capacity(ro.horizon);
            for t in 0..ro.horizon {
                let r = ro.row(t, i);
                inputs.push(student_input(env, prev));
                teacher.push(ro.probs[r * a_n..(r + 1) * a_n].to_vec());
                prev = Some((ro.actions[r], ro.outcomes[r]));
            }
            DistillRow { inputs, teacher }
        })
        .collect()
}

/// Sample `n` teacher episodes (actions drawn from the teacher distribution).
pub fn teacher_rows<T: Teacher + ?Sized>(teacher: &T, env: &Environment, n: usize, seed: u64) -> Result<Vec<DistillRow>> {
    Ok(rows_from(env, &rollout_batch(teacher, env, n, seed, RolloutOptions::default())?))
}

fn stack(rows: &[DistillRow], width: usize, pick: impl Fn(&DistillRow, usize) -> &Vec<f64>) -> Vec<Vec<f64>> {
    let horizon = rows[0].inputs.len();
    (0..horizon)
        .map(|t| {
            let mut v = Vec::with_capacity(rows.len() * width);
            for r in rows {
                v.extend(pick(r, t));
            }
            v
        })
        .collect()
}

/// Mean cross-entropy over batch and time, and its parameter gradient.
pub fn sequence_loss(student: &Lstm, rows: &[DistillRow], masks: Option<&[crate::nn::lstm::StepMasks]>) -> Result<(f64, Vec<f64>)> {
    let b = rows.len();
    let xs = stack(rows, student.input, |r, t| &r.inputs[t]);
    let cache = student.forward_sequence(&xs, b, masks)?;
    let horizon = xs.len();
    let norm = (b * horizon) as f64;
    let a_n = student.output;
    let mut loss = 0.0;
    let mut dlogits = Vec::with_capacity(horizon);
    for (t, probs) in cache.probs.iter().enumerate() {
        let mut d = vec![0.0; b * a_n];
        for (i, row) in rows.iter().enumerate() {
            let ce = cross_entropy_loss(&probs[i * a_n..(i + 1) * a_n], &row.teacher[t])?;
            loss += ce.loss / norm;
            for (x, g) in d[i * a_n..(i + 1) * a_n].iter_mut().zip(ce.grad_logits) {
                *x = g / norm;
            }
        }
        dlogits.push(d);
    }
    Ok((loss, student.backward(&cache, &dlogits)))
}

/// One dropout-regularized descent step; returns the batch loss before it.
pub fn distill_step(student: &mut Lstm, adam: &mut AdamState, rows: &[DistillRow], rng: &mut ChaCha8Rng) -> Result<f64> {
    let masks = student.sample_masks(rng, rows.len(), rows[0].inputs.len());
    let (loss, grad) = sequence_loss(student, rows, Some(&masks))?;
    let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
    adam.step(&mut student.params, &descent)?;
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub episodes: usize,
    /// Fraction of visited states where the student's greedy action equals
    /// the teacher's greedy action.
    pub agreement: f64,
    pub mean_rq_final: f64,
    pub mean_overlap: f64,
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

/// Runs the student closed-loop (greedy, evaluation mode) on `episodes`
/// fresh episodes and compares with the teacher at every visited state.
pub fn validate<T: Teacher + ?Sized>(student: &Lstm, teacher: &T, env: &Environment, episodes: usize, seed: u64) -> Result<ValidationReport> {
    let a_n = env.n_actions();
    let d = env.observation_len();
    let mut states: Vec<_> = (0..episodes as u64).map(|i| env.reset(seed.wrapping_add(i))).collect();
    let mut prev: Vec<Option<(usize, Option<usize>)>> = vec![None; episodes];
    let mut lstm = student.initial_state(episodes);
    let mut agree = 0usize;
    let mut obs = vec![0.0; episodes * d];
    for t in 0..env.horizon() {
        let x: Vec<f64> = prev.iter().flat_map(|p| student_input(env, *p)).collect();
        let sp = student.step(&mut lstm, &x)?;
        states
            .par_iter()
            .zip(obs.par_chunks_mut(d))
            .try_for_each(|(s, row)| env.observe(s).map(|o| o.write_into(row)))?;
        let (tp, _) = teacher.probs(&obs, episodes, t)?;
        let chosen: Vec<usize> = sp.chunks(a_n).map(argmax).collect();
        agree += chosen.iter().zip(tp.chunks(a_n)).filter(|(a, p)| **a == argmax(p)).count();
        let outs: Vec<_> = states.par_iter_mut().zip(&chosen).map(|(s, &a)| env.apply(s, a)).collect::<Result<_>>()?;
        for ((p, &a), o) in prev.iter_mut().zip(&chosen).zip(outs) {
            *p = Some((a, o.outcome));
        }
    }
    let e = episodes as f64;
    let target = env.spec.target_qubit;
    let overlaps: Vec<f64> = states.par_iter().map(|s| overlap_worst_case(&s.frame.to_dense(), target)).collect::<Result<_>>()?;
    Ok(ValidationReport {
        episodes,
        agreement: agree as f64 / (e * env.horizon() as f64),
        mean_rq_final: states.iter().map(|s| s.rq).sum::<f64>() / e,
        mean_overlap: overlaps.iter().sum::<f64>() / e,
    })
}

#[derive(Clone, Debug)]
pub struct DistillResult {
    pub student: Lstm,
    pub optimizer: AdamState,
    /// Training loss per update.
    pub losses: Vec<f64>,
    /// `(update, report)` for every intermediate validation.
    pub validations: Vec<(usize, ValidationReport)>,
    pub final_report: ValidationReport,
}

/// Seed offset separating held-out validation episodes from training data.
pub const VALIDATION_SEED_OFFSET: u64 = 1 << 40;

/// Train the recurrent student on teacher rollouts. Every batch of
/// `cfg.batch` freshly sampled episodes is used for `cfg.reuse` updates.
pub fn distill_recurrent<T: Teacher + ?Sized>(teacher: &T, env: &Environment, cfg: &DistillConfig, seed: u64) -> Result<DistillResult> {
    if teacher.n_actions() != env.n_actions() || teacher.input_size().is_some_and(|m| m != env.observation_len()) {
        return Err(QffError::Config(format!("teacher {} does not match the scenario", teacher.architecture())));
    }
    if cfg.batch == 0 || cfg.reuse == 0 {
        return Err(QffError::Config("distillation batch and reuse must be positive".into()));
    }
    let mut student = Lstm::init(student_input_len(env), cfg.hidden, env.n_actions(), seed)?;
    student.keep = cfg.keep_probability;
    let a = &cfg.adam;
    let mut adam = AdamState::new(student.n_params(), a.eta, a.beta1, a.beta2);
    adam.bias_correction = a.bias_correction;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut losses = Vec::with_capacity(cfg.updates);
    let mut validations = Vec::new();
    let mut rows = Vec::new();
    let mut generation = 0u64;
    for u in 0..cfg.updates {
        if u % cfg.reuse == 0 {
            let s = seed.wrapping_add(generation * cfg.batch as u64);
            rows = teacher_rows(teacher, env, cfg.batch, s)?;
            generation += 1;
        }
        losses.push(distill_step(&mut student, &mut adam, &rows, &mut rng)?);
        if cfg.validate_every > 0 && (u + 1) % cfg.validate_every == 0 {
            let r = validate(&student, teacher, env, cfg.validation_episodes, seed.wrapping_add(VALIDATION_SEED_OFFSET))?;
            validations.push((u + 1, r));
        }
    }
    let final_report = validate(&student, teacher, env, cfg.validation_episodes, seed.wrapping_add(VALIDATION_SEED_OFFSET))?;
    Ok(DistillResult { student, optimizer: adam, losses, validations, final_report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{Action, Axis};
    use crate::reward::RewardConfig;
    use crate::rl::policy::ScriptedPolicy;
    use crate::rl::AdamConfig;
    use crate::scenario::preset;

    fn env(horizon: usize) -> Environment {
        let mut c = preset("all-to-all").unwrap();
        c.horizon = horizon;
        Environment::from_config(&c, RewardConfig::default()).unwrap()
    }

    fn parity_teacher(e: &Environment) -> ScriptedPolicy {
        let idx = |a| e.actions.index_of(&a).unwrap();
        let c = |a, b| idx(Action::Cnot { control: a, target: b });
        let m3 = idx(Action::Measure { qubit: 3, axis: Axis::Z });
        ScriptedPolicy::new(e.n_actions(), vec![c(0, 1), c(0, 2)], vec![c(0, 3), c(1, 3), m3, c(1, 3), c(2, 3), m3]).unwrap()
    }

    #[test]
    fn input_layout() {
        let e = env(10);
        assert_eq!(student_input_len(&e), 26);
        let x = student_input(&e, None);
        assert_eq!(x.iter().sum::<f64>(), 1.0);
        assert_eq!(x[25], 1.0);
        let m = e.actions.measurement_indices[1];
        let x = student_input(&e, Some((m, Some(1))));
        assert_eq!((x[m], x[22], x[25]), (1.0, -1.0, 0.0));
        let x = student_input(&e, Some((m, Some(0))));
        assert_eq!(x[22], 1.0);
        let x = student_input(&e, Some((0, None)));
        assert_eq!(x.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn rows_follow_teacher() {
        let e = env(9);
        let t = parity_teacher(&e);
        let rows = teacher_rows(&t, &e, 3, 0).unwrap();
        for r in &rows {
            for step in 0..9 {
                assert_eq!(r.teacher[step][t.action_at(step)], 1.0);
                if step > 0 {
                    assert_eq!(r.inputs[step][t.action_at(step - 1)], 1.0);
                }
            }
        }
    }

    #[test]
    fn loss_decreases_on_fixed_batch() {
        let e = env(20);
        let t = parity_teacher(&e);
        let rows = teacher_rows(&t, &e, 16, 1).unwrap();
        let mut s = Lstm::init(26, 32, 21, 0).unwrap();
        let mut adam = AdamState::new(s.n_params(), 1e-3, 0.9, 0.999);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut prev = sequence_loss(&s, &rows, None).unwrap().0;
        for _ in 0..10 {
            distill_step(&mut s, &mut adam, &rows, &mut rng).unwrap();
            let now = sequence_loss(&s, &rows, None).unwrap().0;
            assert!(now < prev, "{now} >= {prev}");
            prev = now;
        }
    }

    #[test]
    fn mismatched_teacher_rejected() {
        let e = env(5);
        let t = ScriptedPolicy::new(3, vec![], vec![0]).unwrap();
        assert!(distill_recurrent(&t, &e, &DistillConfig::default(), 0).is_err());
    }

    #[test]
    fn small_student_learns_periodic_teacher() {
        let e = env(24);
        let t = parity_teacher(&e);
        let cfg = DistillConfig {
            hidden: 32,
            updates: 300,
            keep_probability: 1.0,
            adam: AdamConfig { eta: 1e-2, ..Default::default() },
            validation_episodes: 10,
            ..Default::default()
        };
        let r = distill_recurrent(&t, &e, &cfg, 0).unwrap();
        assert!(r.losses.last().unwrap() < &r.losses[0]);
        assert!(r.final_report.agreement > 0.95, "{:?}", r.final_report);
    }
}
