//! Training loop for the state-aware policy network.

use super::config::TrainConfig;
use super::gradient::{entropy_gradient, natural_gradient, policy_gradient};
use super::rollout::{mean_returns, rollout_batch, RolloutOptions};
use crate::error::{QffError, Result};
use crate::nn::{entropy, AdamState, Checkpoint, Mlp};
use crate::reward::BaselineStore;
use crate::scenario::Environment;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// One learning-curve line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub epoch: usize,
    pub episodes: usize,
    pub mean_rq_final: f64,
    pub mean_return: f64,
    pub destructive_rate: f64,
    pub entropy: f64,
    pub wall_time: f64,
    #[serde(skip)]
    pub action_histogram: Vec<usize>,
}

pub const CURVE_HEADER: &str = "epoch,episodes,mean_rq_final,mean_return,destructive_rate,entropy,wall_time";

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for r in rows {
        s += &format!(
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.3}\n",
            r.epoch, r.episodes, r.mean_rq_final, r.mean_return, r.destructive_rate, r.entropy, r.wall_time
        );
    }
    s
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub policy: Mlp,
    pub optimizer: AdamState,
    pub baseline: BaselineStore,
    pub curve: Vec<CurveRow>,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Epochs in which the natural-gradient solve hit its iteration cap.
    pub cg_warnings: usize,
}

impl TrainResult {
    pub fn checkpoint(&self, scenario_hash: &str) -> Checkpoint {
        let mut aux = vec![self.baseline.epochs as f64];
        aux.extend(&self.baseline.b);
        Checkpoint {
            architecture: self.policy.architecture(),
            scenario_hash: scenario_hash.to_string(),
            epoch: self.epochs_run as u64,
            params: self.policy.params.clone(),
            optimizer: self.optimizer.to_blob(),
            aux,
        }
    }
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Periodic and final checkpoints are written here.
    pub checkpoint_path: Option<PathBuf>,
    pub scenario_hash: String,
    /// Continue from a saved state instead of a fresh initialization.
    pub resume: Option<Checkpoint>,
    pub on_epoch: Option<&'a mut dyn FnMut(&CurveRow)>,
}

fn fresh_state(env: &Environment, cfg: &TrainConfig) -> Result<(Mlp, AdamState, BaselineStore, usize)> {
    let mut sizes = vec![env.observation_len()];
    sizes.extend(&cfg.hidden);
    sizes.push(env.n_actions());
    let net = Mlp::init(&sizes, cfg.seed)?;
    let adam = adam_for(&net, cfg);
    Ok((net, adam, BaselineStore::new(env.horizon()), 0))
}

fn adam_for(net: &Mlp, cfg: &TrainConfig) -> AdamState {
    let a = &cfg.adam;
    let mut s = AdamState::new(net.n_params(), a.eta, a.beta1, a.beta2);
    s.bias_correction = a.bias_correction;
    s
}

fn resumed_state(env: &Environment, cfg: &TrainConfig, ck: &Checkpoint) -> Result<(Mlp, AdamState, BaselineStore, usize)> {
    let net = Mlp::from_checkpoint(ck)?;
    if net.input_size() != env.observation_len() || net.output_size() != env.n_actions() {
        return Err(QffError::Checkpoint(format!("{} does not fit this scenario", ck.architecture)));
    }
    let mut adam = adam_for(&net, cfg);
    adam.load_blob(&ck.optimizer)?;
    if ck.aux.len() != 1 + env.horizon() {
        return Err(QffError::Checkpoint("baseline length does not match the horizon".into()));
    }
    let baseline = BaselineStore { b: ck.aux[1..].to_vec(), epochs: ck.aux[0] as u64 };
    Ok((net, adam, baseline, ck.epoch as usize))
}

fn diagnostic_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".nan-dump.json");
    PathBuf::from(s)
}

/// Writes the state preceding a non-finite failure next to the checkpoint.
fn dump_diagnostics(path: Option<&Path>, epoch: usize, net: &Mlp, curve: &[CurveRow], err: &QffError) {
    let Some(p) = path else { return };
    let max_abs = net.params.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let finite = net.params.iter().all(|x| x.is_finite());
    let last: Vec<&CurveRow> = curve.iter().rev().take(5).collect();
    let body = serde_json::json!({
        "epoch": epoch,
        "error": err.to_string(),
        "params_finite": finite,
        "max_abs_param": max_abs,
        "recent_curve": last,
        "hint": "lower the learning rate (adam.eta) and retry",
    });
    let _ = std::fs::write(diagnostic_path(p), serde_json::to_string_pretty(&body).unwrap_or_default());
}

/// Natural policy-gradient training of the state-aware network.
pub fn train_state_aware(env: &Environment, cfg: &TrainConfig, mut opts: TrainOptions) -> Result<TrainResult> {
    cfg.validate()?;
    let (mut net, mut adam, mut baseline, start) = match &opts.resume {
        Some(ck) => resumed_state(env, cfg, ck)?,
        None => fresh_state(env, cfg)?,
    };
    let trivial = env.trivial_rq_final();
    let gamma = env.reward.gamma;
    let n = cfg.batch;
    let clock = Instant::now();
    let mut curve = Vec::new();
    let mut cg_warnings = 0;
    let mut stopped_early = false;
    let mut epoch = start;
    let save = |net: &Mlp, adam: &AdamState, baseline: &BaselineStore, epoch: usize| -> Result<()> {
        if let Some(p) = &opts.checkpoint_path {
            let r = TrainResult {
                policy: net.clone(),
                optimizer: adam.clone(),
                baseline: baseline.clone(),
                curve: Vec::new(),
                epochs_run: epoch,
                stopped_early: false,
                cg_warnings: 0,
            };
            r.checkpoint(&opts.scenario_hash).save(p)?;
        }
        Ok(())
    };
    while epoch < cfg.epochs {
        let mut step = || -> Result<(CurveRow, bool)> {
            let seed = cfg.seed.wrapping_add((epoch as u64).wrapping_mul(n as u64));
            let ro = rollout_batch(&net, env, n, seed, RolloutOptions { keep_cache: true, ..Default::default() })?;
            let cache = ro.cache.as_ref().expect("cache requested");
            let returns = ro.returns(gamma);
            let means = mean_returns(&returns, n);
            let mut g = policy_gradient(&net, cache, &ro.actions, &returns, &baseline.b, cfg.reward_scale)?;
            let eg = entropy_gradient(&net, cache, cfg.entropy_at(epoch));
            for (x, y) in g.iter_mut().zip(&eg) {
                *x += y;
            }
            let mut cg_capped = false;
            if cfg.natural {
                let res = natural_gradient(&net, cache, &ro.actions, &g, &cfg.cg)?;
                cg_capped = !res.converged;
                g = res.x;
            }
            let mean_entropy = (0..cache.n).map(|r| entropy(cache.probs_row(r))).sum::<f64>() / cache.n as f64;
            let row = CurveRow {
                epoch,
                episodes: (epoch + 1) * n,
                mean_rq_final: ro.mean_rq_final(),
                mean_return: means[0],
                destructive_rate: ro.destructive_rate(),
                entropy: mean_entropy,
                wall_time: if cfg.record_wall_time { clock.elapsed().as_secs_f64() } else { 0.0 },
                action_histogram: ro.action_histogram(),
            };
            if ![row.mean_rq_final, row.mean_return, row.entropy].iter().all(|x| x.is_finite()) {
                return Err(QffError::NonFinite(format!("learning curve at epoch {epoch}")));
            }
            baseline.update(&means, env.reward.kappa);
            adam.step(&mut net.params, &g)?;
            if let Some(i) = net.params.iter().position(|x| !x.is_finite()) {
                return Err(QffError::NonFinite(format!("parameter {i} after the update of epoch {epoch}")));
            }
            Ok((row, cg_capped))
        };
        let (row, capped) = match step() {
            Ok(v) => v,
            Err(e @ QffError::NonFinite(_)) => {
                dump_diagnostics(opts.checkpoint_path.as_deref(), epoch, &net, &curve, &e);
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        cg_warnings += usize::from(capped);
        if let Some(f) = opts.on_epoch.as_mut() {
            f(&row);
        }
        curve.push(row);
        epoch += 1;
        if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
            save(&net, &adam, &baseline, epoch)?;
        }
        if let Some(es) = &cfg.early_stop {
            if es.window > 0 && curve.len() >= es.window {
                let tail = &curve[curve.len() - es.window..];
                let w = es.window as f64;
                let destr = tail.iter().map(|r| r.destructive_rate).sum::<f64>() / w;
                let rq = tail.iter().map(|r| r.mean_rq_final).sum::<f64>() / w;
                if destr < es.max_destructive_rate && rq > trivial + es.min_rq_gain {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    save(&net, &adam, &baseline, epoch)?;
    Ok(TrainResult { policy: net, optimizer: adam, baseline, curve, epochs_run: epoch, stopped_early, cg_warnings })
}
