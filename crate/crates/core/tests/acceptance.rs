//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset:
//! `cargo test -p qff-core --test acceptance -- 5 11`.

use nalgebra::{DMatrix, DVector};
use qff_core::action::{Action, Axis};
use qff_core::metrics::{recoverable_q_info, RqMethod};
use qff_core::nn::gradcheck::{max_relative_error, numeric_gradient, numeric_gradient_5pt};
use qff_core::nn::loss::{cross_entropy_loss, softmax_in_place};
use qff_core::nn::{AdamState, Lstm, Mlp};
use qff_core::oracles::{analytic_two_qubit, enumerate_strategies, evaluate_strategy, strategy_count, OracleModel, Tree};
use qff_core::qmem::{build_generator, step_maps, step_maps_with, CPBranch, LogicalFrame, NoiseKind, SuperOp};
use qff_core::reward::RewardConfig;
use qff_core::rl::distill::{distill_step, sequence_loss};
use qff_core::rl::{
    curve_csv, distill_recurrent, evaluate_policy, natural_gradient, policy_gradient, rollout_batch, teacher_rows,
    train_state_aware, validate, weighted_score, AdamConfig, CgConfig, DistillConfig, EarlyStop, LoadedPolicy,
    RolloutOptions, ScriptedPolicy, TrainConfig, TrainOptions,
};
use qff_core::scenario::{
    preset, trajectory_jsonl, BackendChoice, Connectivity, Environment, Measurements, NoiseSpec, ScenarioConfig,
    SCHEMA_VERSION,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Display;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

trait OrMsg<T> {
    fn or_msg(self) -> Result<T, String>;
}

impl<T, E: Display> OrMsg<T> for Result<T, E> {
    fn or_msg(self) -> Result<T, String> {
        self.map_err(|e| e.to_string())
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- tolerances

const TOL_CURVE: f64 = 1e-6;
const TOL_BRANCH: f64 = 1e-9;
const TOL_BACKEND: f64 = 1e-9;
const TOL_ANALYTIC: f64 = 1e-6;
const TOL_LIMIT: f64 = 0.005;
const TOL_GRADIENT: f64 = 1e-5;
const TOL_NATURAL: f64 = 1e-6;
const BANDIT_SIGMAS: f64 = 3.0;
const MAX_DESTRUCTIVE_RATE: f64 = 0.01;
const MIN_RQ_GAIN: f64 = 0.02;
const MIN_AGREEMENT: f64 = 0.99;

// ---------------------------------------------------------------- helpers

fn rq(frame: &LogicalFrame) -> Result<f64, String> {
    recoverable_q_info(frame, RqMethod::Axis).map(|r| r.0).or_msg()
}

/// Gates without any decoherence.
fn ideal(action: Action, n: usize) -> Result<Vec<CPBranch>, String> {
    step_maps_with(&action, n, &SuperOp::identity(1 << n), 0.0).or_msg()
}

fn apply_unitary(frame: &LogicalFrame, action: Action) -> Result<LogicalFrame, String> {
    frame.evolve(&ideal(action, frame.n_qubits)?[0]).or_msg()
}

/// Every branch of `action` applied to a probability-weighted ensemble.
fn branch_all(ensemble: Vec<(f64, LogicalFrame)>, maps: &[CPBranch]) -> Result<Vec<(f64, Option<usize>, LogicalFrame)>, String> {
    let mut out = Vec::new();
    for (w, f) in ensemble {
        for b in maps {
            let p = b.probability(&f);
            if p > 1e-14 {
                out.push((w * p, b.outcome, f.evolve(b).or_msg()?));
            }
        }
    }
    Ok(out)
}

fn bit_flip_scenario(qubits: usize, t_dec: f64, horizon: usize) -> ScenarioConfig {
    let all: Vec<usize> = (0..qubits).collect();
    ScenarioConfig {
        version: SCHEMA_VERSION,
        name: format!("bit-flip-{qubits}"),
        qubits,
        connectivity: Connectivity::Named(if qubits > 1 { "all-to-all" } else { "none" }.into()),
        measurements: Measurements { z: all.clone(), xy: Vec::new() },
        flips: all,
        noise: NoiseSpec { kind: NoiseKind::BitFlip, t_dec: Some(t_dec), moments: Vec::new() },
        msmt_error: 0.0,
        horizon,
        dt: 1.0,
        pca_components: 1,
        decode_window: 0,
        target_qubit: 0,
        backend: BackendChoice::Auto,
    }
}

fn env_with(cfg: &ScenarioConfig, backend: BackendChoice) -> Result<Environment, String> {
    let mut c = cfg.clone();
    c.backend = backend;
    Environment::from_config(&c, RewardConfig::default()).or_msg()
}

fn idle_index(env: &Environment) -> usize {
    env.actions.index_of(&Action::Idle).expect("idle is always available")
}

// ---------------------------------------------------------------- criteria

fn trivial_decay() -> Outcome {
    let start = Instant::now();
    let mut cfg = bit_flip_scenario(1, 1200.0, 200);
    cfg.measurements.z.clear();
    cfg.flips.clear();
    let want = (-1.0f64 / 3.0).exp();
    let mut worst: f64 = 0.0;
    for backend in [BackendChoice::Dense, BackendChoice::Chz] {
        let env = env_with(&cfg, backend)?;
        ensure(env.n_actions() == 1, || format!("expected an idle-only action set, got {}", env.n_actions()))?;
        let mut s = env.reset(0);
        for _ in 0..200 {
            env.apply(&mut s, idle_index(&env)).or_msg()?;
        }
        worst = worst.max((s.rq - want).abs());
    }
    let elapsed = start.elapsed();
    ensure(worst < TOL_CURVE, || format!("R_Q(T) off by {worst:.2e}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("|R_Q(T) - e^(-1/3)| = {worst:.1e} on both backends in {elapsed:.2?}"))
}

/// Three data qubits encoded into the repetition code, then left alone.
fn repetition_curve() -> Outcome {
    let t_dec = 1200.0;
    let g = build_generator(NoiseKind::BitFlip, 3, t_dec, &[]).or_msg()?;
    let idle = step_maps(&Action::Idle, &g, 1.0, 0.0).or_msg()?;
    let mut f = LogicalFrame::initial(3);
    for target in [1, 2] {
        f = apply_unitary(&f, Action::Cnot { control: 0, target })?;
    }
    let mut worst: f64 = 0.0;
    for t in 1..=400 {
        f = f.evolve(&idle[0]).or_msg()?;
        let x = t as f64 / t_dec;
        let want = 0.5 * (3.0 - (-4.0 * x).exp()) * (-2.0 * x).exp();
        worst = worst.max((rq(&f)? - want).abs());
        if t % 200 == 0 {
            let grid = recoverable_q_info(&f, RqMethod::Grid).or_msg()?.0;
            ensure(grid >= want - 1e-9 && grid - want < 1e-3, || format!("sphere search gives {grid} vs {want}"))?;
        }
    }
    ensure(worst < TOL_CURVE, || format!("max deviation {worst:.2e}"))?;
    Ok(format!("400 steps, max |R_Q - closed form| = {worst:.1e}"))
}

/// Ideal parity read-out of both stabilizers at `t0` through one ancilla,
/// which is reset by measurement and conditional flip before each use.
fn syndrome_reset() -> Outcome {
    let (t_dec, t0) = (1200.0, 150.0);
    let n = 4;
    let g = build_generator(NoiseKind::BitFlip, n, t_dec, &[]).or_msg()?;
    let mut f = LogicalFrame::initial(n);
    for target in [1, 2] {
        f = apply_unitary(&f, Action::Cnot { control: 0, target })?;
    }
    f = f.evolve(&step_maps(&Action::Idle, &g, t0, 0.0).or_msg()?[0]).or_msg()?;
    let measure = ideal(Action::Measure { qubit: 3, axis: Axis::Z }, n)?;
    let reset = |branches: Vec<(f64, Option<usize>, LogicalFrame)>| -> Result<Vec<(f64, LogicalFrame)>, String> {
        branches
            .into_iter()
            .map(|(w, o, f)| match o {
                Some(1) => Ok((w, apply_unitary(&f, Action::Flip { qubit: 3 })?)),
                _ => Ok((w, f)),
            })
            .collect()
    };
    let mut ens = reset(branch_all(vec![(1.0, f)], &measure)?)?;
    for (a, b) in [(0, 1), (1, 2)] {
        ens = ens
            .into_iter()
            .map(|(w, f)| {
                let f = apply_unitary(&f, Action::Cnot { control: a, target: 3 })?;
                Ok((w, apply_unitary(&f, Action::Cnot { control: b, target: 3 })?))
            })
            .collect::<Result<_, String>>()?;
        ens = reset(branch_all(ens, &measure)?)?;
    }
    let total: f64 = ens.iter().map(|(w, _)| w).sum();
    ensure((total - 1.0).abs() < 1e-12, || format!("branch weights sum to {total}"))?;
    let idle = step_maps(&Action::Idle, &g, 1.0, 0.0).or_msg()?;
    let mut worst: f64 = 0.0;
    for s in 1..=300 {
        let mut avg = 0.0;
        for (w, f) in ens.iter_mut() {
            *f = f.evolve(&idle[0]).or_msg()?;
            avg += *w * rq(f)?;
        }
        let t = t0 + s as f64;
        let want = 0.25 * (3.0 - (-4.0 * t0 / t_dec).exp()) * (3.0 - (-4.0 * (t - t0) / t_dec).exp()) * (-2.0 * t / t_dec).exp();
        worst = worst.max((avg - want).abs());
    }
    ensure(worst < TOL_CURVE, || format!("max deviation {worst:.2e}"))?;
    Ok(format!("{} syndrome branches, 300 steps after t0 = {t0}, max deviation {worst:.1e}", ens.len()))
}

fn two_qubit_revival() -> Outcome {
    let t_dec = 1200.0;
    let g = build_generator(NoiseKind::BitFlip, 2, t_dec, &[]).or_msg()?;
    let cnot = Action::Cnot { control: 0, target: 1 };
    let measure = ideal(Action::Measure { qubit: 1, axis: Axis::Z }, 2)?;
    // The ancilla's prepared state is the outcome that signals no relative flip.
    let fresh = LogicalFrame::initial(2);
    let down = measure.iter().find(|b| (b.probability(&fresh) - 1.0).abs() < 1e-12).and_then(|b| b.outcome);
    let mut worst = [0.0f64; 3];
    for t in [1.0, 10.0, 100.0, 300.0, 1000.0, 3000.0] {
        let mut f = apply_unitary(&LogicalFrame::initial(2), cnot)?;
        f = f.evolve(&step_maps(&Action::Idle, &g, t, 0.0).or_msg()?[0]).or_msg()?;
        f = apply_unitary(&f, cnot)?;
        let before = rq(&f)?;
        let e = (-4.0 * t / t_dec).exp();
        let mut avg = 0.0;
        for b in &measure {
            let p = b.probability(&f);
            let r = rq(&f.evolve(b).or_msg()?)?;
            avg += p * r;
            if b.outcome == down {
                worst[0] = worst[0].max((p - 0.5 * (1.0 + e)).abs());
                worst[1] = worst[1].max((r - 2.0 * (-2.0 * t / t_dec).exp() / (1.0 + e)).abs());
            }
        }
        worst[2] = worst[2].max((avg - before).abs());
    }
    ensure(worst.iter().all(|&w| w < TOL_BRANCH), || format!("deviations (p, R_Q, average) = {:.2e} {:.2e} {:.2e}", worst[0], worst[1], worst[2]))?;
    Ok(format!("max deviations: probability {:.1e}, R_Q {:.1e}, average {:.1e}", worst[0], worst[1], worst[2]))
}

fn backend_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut t_dense, mut t_chz) = (Duration::ZERO, Duration::ZERO);
    let mut compared = 0usize;
    let mut worst: f64 = 0.0;
    let envs: Vec<_> = (1..=4)
        .flat_map(|n| [0.0, 0.05].map(move |eps| (n, eps)))
        .map(|(n, eps)| {
            let mut c = bit_flip_scenario(n, 15.0, 30);
            c.msmt_error = eps;
            Ok((env_with(&c, BackendChoice::Dense)?, env_with(&c, BackendChoice::Chz)?))
        })
        .collect::<Result<_, String>>()?;
    for trial in 0..1000u64 {
        let (dense, chz) = &envs[(trial % envs.len() as u64) as usize];
        ensure(chz.uses_chz() && !dense.uses_chz(), || "backend selection ignored".into())?;
        let actions: Vec<usize> = (0..30).map(|_| rng.random_range(0..dense.n_actions())).collect();
        let run = |env: &Environment| -> Result<(Vec<(Option<usize>, f64, f64, Vec<f64>)>, Duration), String> {
            let start = Instant::now();
            let mut s = env.reset(trial);
            let mut trace = Vec::with_capacity(30);
            for &a in &actions {
                let probs = env.successors(&s.frame, a).or_msg()?.iter().map(|x| x.probability).collect();
                let o = env.apply(&mut s, a).or_msg()?;
                trace.push((o.outcome, o.probability, o.rq, probs));
            }
            Ok((trace, start.elapsed()))
        };
        let (a, da) = run(dense)?;
        let (b, db) = run(chz)?;
        t_dense += da;
        t_chz += db;
        for (x, y) in a.iter().zip(&b) {
            ensure(x.0 == y.0, || format!("trial {trial}: sampled outcomes differ"))?;
            ensure(x.3.len() == y.3.len(), || format!("trial {trial}: branch counts differ"))?;
            worst = worst.max((x.1 - y.1).abs()).max((x.2 - y.2).abs());
            for (p, q) in x.3.iter().zip(&y.3) {
                worst = worst.max((p - q).abs());
            }
            compared += 1;
        }
    }
    ensure(worst < TOL_BACKEND, || format!("max deviation {worst:.2e}"))?;
    let speedup = t_dense.as_secs_f64() / t_chz.as_secs_f64();
    Ok(format!("1000 sequences, {compared} steps, max deviation {worst:.1e}, stabilizer speedup {speedup:.1}x"))
}

fn correlated_analytic() -> Outcome {
    let t_triv = 500.0;
    let grid: Vec<f64> = (0..10).map(|i| 1e-5 * (12.0f64 / 1e-5).powf(i as f64 / 9.0)).collect();
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for r in [1.0, 2.0, 4.0] {
        let model = OracleModel::from_ratios(&[1.0, r], t_triv).or_msg()?;
        let mut curve = Vec::new();
        for &x in &grid {
            let tau = x * t_triv;
            let tree = Tree::measure(tau, 1, Axis::Y, Tree::End, Tree::End);
            let exact = evaluate_strategy(&model, &tree).or_msg()?.t_eff;
            let closed = analytic_two_qubit(tau, 1.0, r, t_triv).or_msg()?.t_eff;
            worst = worst.max((exact / closed - 1.0).abs());
            curve.push(exact / t_triv);
        }
        let short = (curve[0] - 1.0).abs();
        ensure(short < TOL_LIMIT, || format!("r = {r}: short-idle limit off by {short:.3e}"))?;
        let long = (curve[9] - 1.0).abs();
        if r >= 2.0 {
            ensure(long < TOL_LIMIT, || format!("r = {r}: long-idle limit off by {long:.3e}"))?;
            notes.push(format!("r={r}: {:.2e}/{:.2e}", short, long));
        } else {
            // Equal couplings: the ancilla tracks the data phase exactly and T_eff grows with tau.
            ensure(curve[9] > curve[8] && curve[8] > 1.0, || "equal couplings should not saturate".into())?;
            notes.push(format!("r=1: {short:.2e}/diverges ({:.1}x)", curve[9]));
        }
    }
    ensure(worst < TOL_ANALYTIC, || format!("tree vs closed form off by {worst:.2e}"))?;
    Ok(format!("30 points, max relative deviation {worst:.1e}; limit gaps {}", notes.join(", ")))
}

fn strategy_counts() -> Outcome {
    let ancillas = [1, 2];
    let d1 = enumerate_strategies(1, &[0.1], &ancillas, None).or_msg()?.count();
    ensure(d1 == 16, || format!("d=1, n=1 enumerates {d1} trees"))?;
    let mut table = Vec::new();
    for d in 1..=2usize {
        for n in 1..=3usize {
            let mut nd: u64 = 0;
            for _ in 0..d {
                nd = 4 * n as u64 * (nd + 2) * (nd + 2);
            }
            let counted = strategy_count(d, n, 2);
            let grid: Vec<f64> = (1..=n).map(|i| i as f64 * 0.1).collect();
            let listed = enumerate_strategies(d, &grid, &ancillas, None).or_msg()?.count() as u64;
            ensure(counted == nd.into() && listed == nd, || format!("d={d}, n={n}: recursion {nd}, count {counted}, enumerated {listed}"))?;
            table.push(format!("N_{d}(n={n})={nd}"));
        }
    }
    Ok(table.join(" "))
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut errs = Vec::new();
    // Score function of the down-scaled feedforward policy.
    let sizes = [30, 16, 8, 21];
    let net = Mlp::init(&sizes, 3).or_msg()?;
    let n = 5;
    let x: Vec<f64> = (0..30 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let actions: Vec<usize> = (0..n).map(|_| rng.random_range(0..21)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cache = net.forward_batch(&x, n).or_msg()?;
    let g = weighted_score(&net, &cache, &actions, &w).or_msg()?;
    let f = |p: &[f64]| {
        let m = Mlp::from_params(&sizes, p.to_vec()).unwrap();
        let c = m.forward_batch(&x, n).unwrap();
        (0..n).map(|r| w[r] * c.probs_row(r)[actions[r]].ln()).sum::<f64>()
    };
    errs.push(("mlp score", max_relative_error(&g, &numeric_gradient_5pt(f, &net.params, 1e-3))));
    // Cross-entropy through the same network.
    let teacher: Vec<f64> = (0..n)
        .flat_map(|_| {
            let mut z: Vec<f64> = (0..21).map(|_| rng.random_range(-2.0..2.0)).collect();
            softmax_in_place(&mut z);
            z
        })
        .collect();
    let mut dl = Vec::new();
    for r in 0..n {
        dl.extend(cross_entropy_loss(cache.probs_row(r), &teacher[r * 21..(r + 1) * 21]).or_msg()?.grad_logits);
    }
    let g = net.backward_batch(&cache, &dl);
    let f = |p: &[f64]| {
        let m = Mlp::from_params(&sizes, p.to_vec()).unwrap();
        let c = m.forward_batch(&x, n).unwrap();
        (0..n).map(|r| cross_entropy_loss(c.probs_row(r), &teacher[r * 21..(r + 1) * 21]).unwrap().loss).sum::<f64>()
    };
    errs.push(("mlp cross-entropy", max_relative_error(&g, &numeric_gradient_5pt(f, &net.params, 1e-3))));
    // Cross-entropy with respect to logits.
    let logits: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut p = logits.clone();
    softmax_in_place(&mut p);
    let t = &teacher[..7].iter().map(|v| v / teacher[..7].iter().sum::<f64>()).collect::<Vec<_>>();
    let g = cross_entropy_loss(&p, t).or_msg()?.grad_logits;
    let f = |z: &[f64]| {
        let mut q = z.to_vec();
        softmax_in_place(&mut q);
        cross_entropy_loss(&q, t).unwrap().loss
    };
    errs.push(("logit cross-entropy", max_relative_error(&g, &numeric_gradient(f, &logits, 1e-6))));
    // Recurrent student with dropout masks, through time.
    let (inp, hid, out, steps, batch) = (4, 5, 3, 5, 2);
    let lstm = Lstm::init(inp, hid, out, 11).or_msg()?;
    let xs: Vec<Vec<f64>> = (0..steps).map(|_| (0..batch * inp).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let targets: Vec<usize> = (0..steps * batch).map(|_| rng.random_range(0..out)).collect();
    let masks = lstm.sample_masks(&mut rng, batch, steps);
    let c = lstm.forward_sequence(&xs, batch, Some(&masks)).or_msg()?;
    let dl: Vec<Vec<f64>> = (0..steps)
        .map(|t| {
            let mut d: Vec<f64> = c.probs[t].clone();
            for r in 0..batch {
                d[r * out + targets[t * batch + r]] -= 1.0;
            }
            d
        })
        .collect();
    let g = lstm.backward(&c, &dl);
    let f = |p: &[f64]| {
        let m = Lstm::from_params(inp, hid, out, p.to_vec()).unwrap();
        let c = m.forward_sequence(&xs, batch, Some(&masks)).unwrap();
        -(0..steps).map(|t| (0..batch).map(|r| c.probs[t][r * out + targets[t * batch + r]].ln()).sum::<f64>()).sum::<f64>()
    };
    errs.push(("lstm bptt", max_relative_error(&g, &numeric_gradient_5pt(f, &lstm.params, 2e-2))));
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let summary: Vec<String> = errs.iter().map(|(k, e)| format!("{k} {e:.1e}")).collect();
    ensure(worst <= TOL_GRADIENT, || summary.join(", "))?;
    Ok(summary.join(", "))
}

fn natural_gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut params = 0;
    for inst in 0..50u64 {
        let states = rng.random_range(2..=5usize);
        let acts = rng.random_range(2..=4usize);
        let net = Mlp::init(&[states, acts], inst).or_msg()?;
        params = params.max(net.n_params());
        ensure(net.n_params() <= 30, || format!("{} parameters", net.n_params()))?;
        let m = 40;
        let mut x = vec![0.0; m * states];
        let mut actions = Vec::with_capacity(m);
        for r in 0..m {
            x[r * states + rng.random_range(0..states)] = 1.0;
        }
        let cache = net.forward_batch(&x, m).or_msg()?;
        for r in 0..m {
            let p = cache.probs_row(r);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let a = p.iter().position(|&q| {
                acc += q;
                u < acc
            });
            actions.push(a.unwrap_or(acts - 1));
        }
        let k = net.n_params();
        let mut fisher = DMatrix::<f64>::zeros(k, k);
        for r in 0..m {
            let (_, c) = net.forward(&x[r * states..(r + 1) * states]).or_msg()?;
            let s = DVector::from_vec(net.grad_logp(&c, actions[r]).or_msg()?);
            fisher += &s * s.transpose() / m as f64;
        }
        let damping = 1e-3;
        let g: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = CgConfig { damping, max_iterations: 1000, tolerance: 1e-14, fisher_samples: None };
        let res = natural_gradient(&net, &cache, &actions, &g, &cfg).or_msg()?;
        let pinv = (fisher + DMatrix::identity(k, k) * damping).pseudo_inverse(1e-14).or_msg()?;
        let want = pinv * DVector::from_vec(g);
        let scale = want.amax().max(1.0);
        for (a, b) in res.x.iter().zip(want.iter()) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    ensure(worst < TOL_NATURAL, || format!("max deviation {worst:.2e}"))?;
    Ok(format!("50 instances up to {params} parameters, max scaled deviation {worst:.1e}"))
}

fn bandit_unbiased() -> Outcome {
    let net = Mlp::init(&[1, 2], 4).or_msg()?;
    let rewards = [1.0, 0.25];
    let expected = |p: &[f64]| {
        let (q, _) = Mlp::from_params(&[1, 2], p.to_vec()).unwrap().forward(&[1.0]).unwrap();
        q[0] * rewards[0] + q[1] * rewards[1]
    };
    let exact = numeric_gradient(expected, &net.params, 1e-6);
    let (batches, batch) = (10_000, 8);
    let cache = net.forward_batch(&vec![1.0; batch], batch).or_msg()?;
    let p0 = cache.probs_row(0)[0];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let k = net.n_params();
    let (mut sum, mut sq) = (vec![0.0; k], vec![0.0; k]);
    for _ in 0..batches {
        let actions: Vec<usize> = (0..batch).map(|_| usize::from(rng.random::<f64>() >= p0)).collect();
        let returns: Vec<f64> = actions.iter().map(|&a| rewards[a]).collect();
        let g = policy_gradient(&net, &cache, &actions, &returns, &[0.0], 1.0).or_msg()?;
        for j in 0..k {
            sum[j] += g[j];
            sq[j] += g[j] * g[j];
        }
    }
    let nb = batches as f64;
    let mut worst: f64 = 0.0;
    for j in 0..k {
        let mean = sum[j] / nb;
        let se = ((sq[j] / nb - mean * mean) / (nb - 1.0)).sqrt();
        worst = worst.max((mean - exact[j]).abs() / se);
    }
    ensure(worst < BANDIT_SIGMAS, || format!("worst deviation {worst:.2} standard errors"))?;
    Ok(format!("{batches} batches, worst deviation {worst:.2} standard errors"))
}

fn rl_smoke() -> Outcome {
    let start = Instant::now();
    let cfg = preset("all-to-all-short").ok_or("missing scenario")?;
    let env = Environment::from_config(&cfg, RewardConfig::default()).or_msg()?;
    let trivial = env.trivial_rq_final();
    let mut passed = Vec::new();
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let train = TrainConfig {
            epochs: 500,
            batch: 256,
            seed,
            adam: AdamConfig { eta: 3e-3, ..Default::default() },
            cg: CgConfig { max_iterations: 10, fisher_samples: Some(2048), ..Default::default() },
            early_stop: Some(EarlyStop { window: 3, max_destructive_rate: MAX_DESTRUCTIVE_RATE, min_rq_gain: MIN_RQ_GAIN }),
            ..Default::default()
        };
        let t = Instant::now();
        let r = train_state_aware(&env, &train, TrainOptions::default()).or_msg()?;
        // Confirm on fresh episodes rather than the training batches.
        let rep = evaluate_policy(&LoadedPolicy::Network(r.policy.clone()), &env, 1000, 1 << 32).or_msg()?;
        let ok = rep.destructive_rate < MAX_DESTRUCTIVE_RATE && rep.mean_rq_final >= trivial + MIN_RQ_GAIN;
        lines.push(format!(
            "seed {seed}: {} epochs, R_Q {:.4}, destructive {:.4} ({:.0?})",
            r.epochs_run,
            rep.mean_rq_final,
            rep.destructive_rate,
            t.elapsed()
        ));
        if ok {
            passed.push(seed);
        }
        if passed.len() >= 3 {
            break;
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("trivial {trivial:.4}; {}; total {elapsed:.0?}", lines.join("; "));
    ensure(passed.len() >= 3 && elapsed < Duration::from_secs(7200), || detail.clone())?;
    Ok(detail)
}

fn distillation() -> Outcome {
    let mut cfg = preset("all-to-all").ok_or("missing scenario")?;
    let full = Environment::from_config(&cfg, RewardConfig::default()).or_msg()?;
    cfg.horizon = 24;
    let short = Environment::from_config(&cfg, RewardConfig::default()).or_msg()?;
    let idx = |a| full.actions.index_of(&a).unwrap();
    let c = |a, b| idx(Action::Cnot { control: a, target: b });
    let m3 = idx(Action::Measure { qubit: 3, axis: Axis::Z });
    let teacher = ScriptedPolicy::new(full.n_actions(), vec![c(0, 1), c(0, 2)], vec![c(0, 3), c(1, 3), m3, c(1, 3), c(2, 3), m3]).or_msg()?;
    // Cross-entropy on a fixed batch, dropout disabled.
    let rows = teacher_rows(&teacher, &short, 16, 1).or_msg()?;
    let mut s = Lstm::init(26, 128, 21, 0).or_msg()?;
    s.keep = 1.0;
    let mut adam = AdamState::new(s.n_params(), 1e-3, 0.9, 0.999);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut losses = vec![sequence_loss(&s, &rows, None).or_msg()?.0];
    for _ in 0..10 {
        distill_step(&mut s, &mut adam, &rows, &mut rng).or_msg()?;
        losses.push(sequence_loss(&s, &rows, None).or_msg()?.0);
    }
    let falling = losses.windows(2).filter(|w| w[1] < w[0]).count();
    ensure(losses[10] < losses[0], || format!("fixed-batch losses {losses:.4?}"))?;
    // Full distillation with dropout, validated on held-out full-length episodes.
    let start = Instant::now();
    let dc = DistillConfig {
        hidden: 128,
        batch: 16,
        updates: 2000,
        reuse: 5,
        keep_probability: 0.5,
        adam: AdamConfig { eta: 3e-3, ..Default::default() },
        validation_episodes: 20,
        validate_every: 0,
    };
    let r = distill_recurrent(&teacher, &short, &dc, 7).or_msg()?;
    ensure(r.student.architecture() == "lstm:26-128-128-21", || r.student.architecture())?;
    let held_out = validate(&r.student, &teacher, &full, 100, 1 << 50).or_msg()?;
    let detail = format!(
        "fixed-batch loss {:.3} -> {:.3} ({falling}/10 updates lower); {} updates in {:.0?}; agreement {:.4} over 100 episodes of {} steps",
        losses[0],
        losses[10],
        r.losses.len(),
        start.elapsed(),
        held_out.agreement,
        full.horizon()
    );
    ensure(held_out.agreement >= MIN_AGREEMENT, || detail.clone())?;
    Ok(detail)
}

fn interface_sizes() -> Outcome {
    let want = [
        ("all-to-all", 21, Some(793)),
        ("all-to-all-recovery", 21, Some(803)),
        ("chain-all-msmt", 15, None),
        ("chain-one-msmt", 12, None),
        ("triangle", 14, None),
        ("correlated-2", 3, None),
        ("correlated-3", 5, None),
        ("correlated-4", 7, None),
    ];
    let mut seen = Vec::new();
    for (name, actions, inputs) in want {
        let cfg = preset(name).ok_or(format!("missing scenario {name}"))?;
        let env = Environment::from_config(&cfg, RewardConfig::default()).or_msg()?;
        let obs = env.observe(&env.reset(0)).or_msg()?.to_vec().len();
        ensure(env.n_actions() == actions, || format!("{name}: {} actions", env.n_actions()))?;
        ensure(obs == env.observation_len(), || format!("{name}: observation length {obs}"))?;
        if let Some(i) = inputs {
            ensure(obs == i, || format!("{name}: {obs} inputs"))?;
        }
        seen.push(format!("{}/{}", env.n_actions(), obs));
    }
    Ok(seen.join(" "))
}

fn determinism() -> Outcome {
    let cfg = preset("all-to-all-short").ok_or("missing scenario")?;
    let env = Environment::from_config(&cfg, RewardConfig::default()).or_msg()?;
    let train = TrainConfig { epochs: 3, batch: 32, hidden: vec![32, 32], seed: 21, ..Default::default() };
    let run = |threads: usize| -> Result<(String, String), String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().or_msg()?;
        pool.install(|| {
            let r = train_state_aware(&env, &train, TrainOptions::default()).or_msg()?;
            let opts = RolloutOptions { record_logs: true, ..Default::default() };
            let ro = rollout_batch(&r.policy, &env, 8, 99, opts).or_msg()?;
            let logs: String = ro.logs.iter().map(|l| trajectory_jsonl(l)).collect();
            Ok((curve_csv(&r.curve), logs))
        })
    };
    let reference = run(1)?;
    for threads in [1, 2, 4] {
        let other = run(threads)?;
        ensure(other.0 == reference.0, || format!("learning curve differs with {threads} threads"))?;
        ensure(other.1 == reference.1, || format!("trajectory logs differ with {threads} threads"))?;
    }
    Ok(format!("curve ({} bytes) and logs ({} bytes) identical for 1, 2 and 4 threads", reference.0.len(), reference.1.len()))
}

// ---------------------------------------------------------------- driver

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 14] = [
    (1, "trivial decay law", trivial_decay),
    (2, "repetition-code curve", repetition_curve),
    (3, "syndrome-reset curve", syndrome_reset),
    (4, "two-qubit revival and average", two_qubit_revival),
    (5, "stabilizer backend equivalence", backend_equivalence),
    (6, "correlated-noise closed form", correlated_analytic),
    (7, "strategy counts", strategy_counts),
    (8, "gradient verification", gradients),
    (9, "natural-gradient solve", natural_gradient_oracle),
    (10, "policy-gradient unbiasedness", bandit_unbiased),
    (11, "reinforcement-learning smoke run", rl_smoke),
    (12, "distillation", distillation),
    (13, "interface sizes", interface_sizes),
    (14, "determinism across thread counts", determinism),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {id:>2} {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
