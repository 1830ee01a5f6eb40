//! `train` and `distill`.

use crate::inputs::{self, environment, split_assignment, with_override, write_file, ScenarioArgs};
use crate::manifest::Manifest;
use anyhow::{bail, Context, Result};
use clap::Args;
use qff_core::nn::Checkpoint;
use qff_core::rl::{
    curve_csv, distill_recurrent, train_state_aware, CurveRow, DistillResult, LoadedPolicy, TrainConfig, TrainOptions,
    ValidationReport,
};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const POLICY_FILE: &str = "policy.ckpt";
pub const CURVE_FILE: &str = "curve.csv";
pub const STUDENT_FILE: &str = "student.ckpt";

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Training configuration JSON (defaults are used when omitted).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated seeds, trained in parallel (default: the config seed).
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Override the number of epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override a config key, e.g. `adam.eta=3e-3` (repeatable).
    #[arg(long = "set")]
    sets: Vec<String>,
    /// Train once per value, e.g. `batch=32,64`.
    #[arg(long)]
    sweep: Option<String>,
    /// Continue from the checkpoints already present in the output directory.
    #[arg(long)]
    resume: bool,
    /// Suppress per-epoch progress on stderr.
    #[arg(long, short)]
    quiet: bool,
}

struct Job {
    dir: String,
    cfg: TrainConfig,
}

#[derive(Serialize)]
struct RunSummary {
    run: String,
    seed: u64,
    epochs_run: usize,
    stopped_early: bool,
    cg_warnings: usize,
    final_mean_rq: Option<f64>,
}

fn sweep_jobs(base: &TrainConfig, sweep: Option<&str>, seeds: &[u64]) -> Result<Vec<Job>> {
    let points: Vec<(String, TrainConfig)> = match sweep {
        None => vec![(String::new(), base.clone())],
        Some(s) => {
            let (key, values) = split_assignment(s)?;
            values
                .split(',')
                .map(|v| {
                    let cfg = with_override(base, key, v)?;
                    cfg.validate().with_context(|| format!("sweep point {key}={v}"))?;
                    Ok((format!("{key}={v}/"), cfg))
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(points
        .into_iter()
        .flat_map(|(prefix, cfg)| {
            seeds.iter().map(move |&seed| Job { dir: format!("{prefix}seed-{seed}"), cfg: TrainConfig { seed, ..cfg.clone() } })
        })
        .collect())
}

fn train_one(job: &Job, env: &qff_core::scenario::Environment, hash: &str, out: &Path, resume: bool, quiet: bool) -> Result<RunSummary> {
    let dir = out.join(&job.dir);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_file(&dir.join("train.json"), &(job.cfg.to_json() + "\n"))?;
    let ckpt = dir.join(POLICY_FILE);
    let resume = match resume && ckpt.exists() {
        true => Some(Checkpoint::load(&ckpt).with_context(|| format!("reading {}", ckpt.display()))?),
        false => None,
    };
    let label = job.dir.clone();
    let mut progress = |r: &CurveRow| {
        if !quiet {
            eprintln!(
                "[{label}] epoch {} rq {:.4} destructive {:.4} entropy {:.3} return {:.4}",
                r.epoch, r.mean_rq_final, r.destructive_rate, r.entropy, r.mean_return
            );
        }
    };
    let opts = TrainOptions {
        checkpoint_path: Some(ckpt.clone()),
        scenario_hash: hash.to_string(),
        resume,
        on_epoch: Some(&mut progress),
    };
    let result = train_state_aware(env, &job.cfg, opts).with_context(|| format!("training {}", job.dir))?;
    write_file(&dir.join(CURVE_FILE), &curve_csv(&result.curve))?;
    result.checkpoint(hash).save(&ckpt).with_context(|| format!("writing {}", ckpt.display()))?;
    Ok(RunSummary {
        run: job.dir.clone(),
        seed: job.cfg.seed,
        epochs_run: result.epochs_run,
        stopped_early: result.stopped_early,
        cg_warnings: result.cg_warnings,
        final_mean_rq: result.curve.last().map(|r| r.mean_rq_final),
    })
}

pub fn train(a: TrainArgs) -> Result<()> {
    let scenario = a.scenario.load()?;
    let mut sets = a.sets.clone();
    if let Some(e) = a.epochs {
        sets.push(format!("epochs={e}"));
    }
    let cfg = inputs::load_train(a.train.as_deref(), &sets)?;
    let seeds = if a.seeds.is_empty() { vec![cfg.seed] } else { a.seeds.clone() };
    let jobs = sweep_jobs(&cfg, a.sweep.as_deref(), &seeds)?;
    let hash = scenario.hash();
    let mut manifest = Manifest::begin(&a.out, Some(hash.clone()), Some(cfg.hash()), seeds)?;
    let result = (|| -> Result<()> {
        write_file(&a.out.join("scenario.json"), &(scenario.to_json() + "\n"))?;
        write_file(&a.out.join("train.json"), &(cfg.to_json() + "\n"))?;
        manifest.output("scenario.json");
        manifest.output("train.json");
        let envs: Vec<_> = jobs.iter().map(|j| environment(&scenario, j.cfg.reward.clone())).collect::<Result<_>>()?;
        let summaries: Vec<RunSummary> = jobs
            .par_iter()
            .zip(&envs)
            .map(|(j, env)| train_one(j, env, &hash, &a.out, a.resume, a.quiet))
            .collect::<Result<_>>()?;
        for s in &summaries {
            manifest.output(format!("{}/{CURVE_FILE}", s.run));
            manifest.output(format!("{}/{POLICY_FILE}", s.run));
        }
        write_file(&a.out.join("summary.json"), &(serde_json::to_string_pretty(&summaries)? + "\n"))?;
        manifest.output("summary.json");
        Ok(())
    })();
    manifest.finish(result)
}

#[derive(Args)]
pub struct DistillArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Teacher checkpoint, or an inline `scripted:periodic:...` policy.
    #[arg(long)]
    teacher: String,
    /// Training configuration JSON; its `distill` section is used.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Override a config key, e.g. `distill.updates=500` (repeatable).
    #[arg(long = "set")]
    sets: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct DistillReport {
    teacher: String,
    student: String,
    updates: usize,
    final_loss: Option<f64>,
    validation: Validation,
    history: Vec<(usize, Validation)>,
}

#[derive(Serialize)]
struct Validation {
    episodes: usize,
    agreement: f64,
    mean_rq_final: f64,
    mean_overlap: f64,
}

impl From<&ValidationReport> for Validation {
    fn from(r: &ValidationReport) -> Self {
        Self { episodes: r.episodes, agreement: r.agreement, mean_rq_final: r.mean_rq_final, mean_overlap: r.mean_overlap }
    }
}

pub fn distill(a: DistillArgs) -> Result<()> {
    let scenario = a.scenario.load()?;
    let cfg = inputs::load_train(a.train.as_deref(), &a.sets)?;
    let env = environment(&scenario, cfg.reward.clone())?;
    let teacher = LoadedPolicy::load(&a.teacher).with_context(|| format!("loading teacher {}", a.teacher))?;
    teacher.check_compatible(&env).with_context(|| format!("teacher {}", a.teacher))?;
    let hash = scenario.hash();
    let mut manifest = Manifest::begin(&a.out, Some(hash.clone()), Some(cfg.hash()), vec![a.seed])?;
    let result = (|| -> Result<()> {
        let r: DistillResult = match &teacher {
            LoadedPolicy::Network(m) => distill_recurrent(m, &env, &cfg.distill, a.seed)?,
            LoadedPolicy::Scripted(s) => distill_recurrent(s, &env, &cfg.distill, a.seed)?,
            LoadedPolicy::Student(_) => bail!("a recurrent student cannot serve as a teacher"),
        };
        let ckpt = Checkpoint {
            architecture: r.student.architecture(),
            scenario_hash: hash.clone(),
            epoch: r.losses.len() as u64,
            params: r.student.params.clone(),
            optimizer: r.optimizer.to_blob(),
            aux: Vec::new(),
        };
        let path = a.out.join(STUDENT_FILE);
        ckpt.save(&path).with_context(|| format!("writing {}", path.display()))?;
        let mut losses = String::from("update,loss\n");
        for (i, l) in r.losses.iter().enumerate() {
            losses += &format!("{},{l:.12e}\n", i + 1);
        }
        write_file(&a.out.join("distill_loss.csv"), &losses)?;
        let report = DistillReport {
            teacher: teacher.architecture(),
            student: r.student.architecture(),
            updates: r.losses.len(),
            final_loss: r.losses.last().copied(),
            validation: (&r.final_report).into(),
            history: r.validations.iter().map(|(u, v)| (*u, v.into())).collect(),
        };
        write_file(&a.out.join("report.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
        for f in [STUDENT_FILE, "distill_loss.csv", "report.json"] {
            manifest.output(f);
        }
        Ok(())
    })();
    manifest.finish(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_expands_values_and_seeds() {
        let jobs = sweep_jobs(&TrainConfig::default(), Some("batch=8,16"), &[0, 1]).unwrap();
        let dirs: Vec<_> = jobs.iter().map(|j| j.dir.as_str()).collect();
        assert_eq!(dirs, ["batch=8/seed-0", "batch=8/seed-1", "batch=16/seed-0", "batch=16/seed-1"]);
        assert_eq!((jobs[2].cfg.batch, jobs[2].cfg.seed), (16, 0));
    }

    #[test]
    fn sweep_rejects_invalid_points() {
        assert!(sweep_jobs(&TrainConfig::default(), Some("batch=0"), &[0]).is_err());
        assert!(sweep_jobs(&TrainConfig::default(), Some("nope=1"), &[0]).is_err());
        assert!(sweep_jobs(&TrainConfig::default(), Some("batch"), &[0]).is_err());
    }

    #[test]
    fn nested_override() {
        let c = with_override(&TrainConfig::default(), "adam.eta", "0.003").unwrap();
        assert_eq!(c.adam.eta, 0.003);
        let c = with_override(&c, "cg.fisher_samples", "2048").unwrap();
        assert_eq!(c.cg.fisher_samples, Some(2048));
        assert!(with_override(&c, "adam.eta", "fast").is_err());
    }
}
