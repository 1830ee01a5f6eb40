//! `evaluate` and `export-activations`.

use crate::inputs::{self, environment, write_file, ScenarioArgs};
use crate::manifest::Manifest;
use anyhow::{bail, Context, Result};
use clap::Args;
use qff_core::nn::Checkpoint;
use qff_core::rl::{evaluate_policy, export_activations, rollout_batch, LoadedPolicy, RolloutOptions};
use qff_core::scenario::{trajectory_jsonl, Environment};
use std::path::{Path, PathBuf};

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Checkpoint file, or an inline `scripted:periodic:...` policy.
    #[arg(long)]
    checkpoint: String,
    /// Training configuration whose reward settings apply.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also log this many full trajectories as JSON lines (needs --out).
    #[arg(long, default_value_t = 0)]
    trajectories: usize,
}

/// Load a policy and make sure it fits the scenario. A checkpoint trained on
/// a differently configured scenario only triggers a warning.
fn load_policy(spec: &str, env: &Environment, scenario_hash: &str) -> Result<LoadedPolicy> {
    let policy = if spec.starts_with("scripted:") {
        LoadedPolicy::load(spec)?
    } else {
        let ck = Checkpoint::load(Path::new(spec)).with_context(|| format!("reading checkpoint {spec}"))?;
        if !ck.scenario_hash.is_empty() && ck.scenario_hash != scenario_hash {
            eprintln!("warning: checkpoint {spec} was trained on a different scenario configuration");
        }
        LoadedPolicy::from_checkpoint(&ck).with_context(|| format!("checkpoint {spec}"))?
    };
    policy.check_compatible(env).with_context(|| format!("policy {spec} does not fit the scenario"))?;
    Ok(policy)
}

fn trajectories(policy: &LoadedPolicy, env: &Environment, n: usize, seed: u64) -> Result<String> {
    let opts = RolloutOptions { record_logs: true, ..Default::default() };
    let ro = match policy {
        LoadedPolicy::Network(m) => rollout_batch(m, env, n, seed, opts)?,
        LoadedPolicy::Scripted(s) => rollout_batch(s, env, n, seed, opts)?,
        LoadedPolicy::Student(_) => bail!("trajectory logs are not available for recurrent students"),
    };
    Ok(ro.logs.iter().map(|l| trajectory_jsonl(l)).collect())
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    if a.episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    if a.trajectories > 0 && a.out.is_none() {
        bail!("--trajectories needs --out");
    }
    let scenario = a.scenario.load()?;
    let train = inputs::load_train(a.train.as_deref(), &[])?;
    let env = environment(&scenario, train.reward.clone())?;
    let hash = scenario.hash();
    let policy = load_policy(&a.checkpoint, &env, &hash)?;
    let Some(out) = &a.out else {
        let report = evaluate_policy(&policy, &env, a.episodes, a.seed)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    };
    let train_hash = a.train.as_ref().map(|_| train.hash());
    let mut manifest = Manifest::begin(out, Some(hash), train_hash, vec![a.seed])?;
    let result = (|| -> Result<()> {
        let report = evaluate_policy(&policy, &env, a.episodes, a.seed)?;
        write_file(&out.join("report.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
        manifest.output("report.json");
        if a.trajectories > 0 {
            write_file(&out.join("trajectories.jsonl"), &trajectories(&policy, &env, a.trajectories, a.seed)?)?;
            manifest.output("trajectories.jsonl");
        }
        Ok(())
    })();
    manifest.finish(result)
}

#[derive(Args)]
pub struct ExportArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Network or student checkpoint.
    #[arg(long)]
    checkpoint: String,
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON-lines output file.
    #[arg(long)]
    out: PathBuf,
}

pub fn export(a: ExportArgs) -> Result<()> {
    if a.episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let scenario = a.scenario.load()?;
    let env = environment(&scenario, Default::default())?;
    let policy = load_policy(&a.checkpoint, &env, &scenario.hash())?;
    let rows = export_activations(&policy, &env, a.episodes, a.seed)?;
    let mut text = String::new();
    for r in &rows {
        text += &serde_json::to_string(r)?;
        text.push('\n');
    }
    write_file(&a.out, &text)
}
