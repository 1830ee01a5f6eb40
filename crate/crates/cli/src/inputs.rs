//! Scenario and training-configuration loading, overrides and the
//! `validate-config` / `scenarios` commands.

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use qff_core::reward::RewardConfig;
use qff_core::rl::{student_input_len, TrainConfig};
use qff_core::scenario::{self, BackendChoice, Environment, ScenarioConfig};
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};

/// Scenario selection shared by every simulation command.
#[derive(Args, Clone, Debug)]
pub struct ScenarioArgs {
    /// Scenario JSON file or built-in scenario name.
    #[arg(long)]
    pub scenario: String,
    /// Override the simulation backend (auto, dense or chz).
    #[arg(long)]
    pub backend: Option<String>,
    /// Override the episode length.
    #[arg(long)]
    pub horizon: Option<usize>,
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = load_scenario(&self.scenario)?;
        if let Some(b) = &self.backend {
            cfg.backend = parse_backend(b)?;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        Ok(cfg)
    }
}

fn parse_backend(s: &str) -> Result<BackendChoice> {
    serde_json::from_value(Value::String(s.into())).map_err(|_| anyhow!("unknown backend '{s}' (expected auto, dense or chz)"))
}

/// A readable file takes precedence over a built-in name.
pub fn load_scenario(spec: &str) -> Result<ScenarioConfig> {
    let path = Path::new(spec);
    if path.exists() {
        return ScenarioConfig::load(path).with_context(|| format!("reading scenario {}", path.display()));
    }
    scenario::preset(spec).ok_or_else(|| anyhow!("scenario {spec}: no such file and no built-in scenario of that name"))
}

pub fn load_train(path: Option<&Path>, sets: &[String]) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => TrainConfig::load(p).with_context(|| format!("reading training config {}", p.display()))?,
        None => TrainConfig::default(),
    };
    for s in sets {
        let (key, value) = split_assignment(s)?;
        cfg = with_override(&cfg, key, value)?;
    }
    cfg.validate().context("invalid training config")?;
    Ok(cfg)
}

pub fn split_assignment(s: &str) -> Result<(&str, &str)> {
    s.split_once('=').ok_or_else(|| anyhow!("expected key=value, got '{s}'"))
}

/// Set a dotted key such as `adam.eta`. Values parse as JSON and fall back
/// to plain strings.
pub fn with_override(cfg: &TrainConfig, key: &str, value: &str) -> Result<TrainConfig> {
    let mut root = serde_json::to_value(cfg)?;
    let mut slot = &mut root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| anyhow!("unknown training config key '{key}'"))?;
    }
    *slot = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.into()));
    serde_json::from_value(root).with_context(|| format!("bad value '{value}' for '{key}'"))
}

pub fn environment(cfg: &ScenarioConfig, reward: RewardConfig) -> Result<Environment> {
    Environment::from_config(cfg, reward).with_context(|| format!("building scenario '{}'", cfg.name))
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Scenario JSON file or built-in scenario name.
    #[arg(long)]
    scenario: Option<String>,
    /// Training configuration JSON file.
    #[arg(long)]
    train: Option<PathBuf>,
}

#[derive(Serialize)]
struct ScenarioSummary {
    name: String,
    hash: String,
    qubits: usize,
    actions: usize,
    observation_len: usize,
    student_input_len: usize,
    backend: &'static str,
    horizon: usize,
    t_dec: f64,
    t_single: f64,
}

#[derive(Serialize)]
struct ValidationSummary {
    scenario: Option<ScenarioSummary>,
    train_config_hash: Option<String>,
}

pub fn validate(a: ValidateArgs) -> Result<()> {
    if a.scenario.is_none() && a.train.is_none() {
        bail!("nothing to validate: pass --scenario and/or --train");
    }
    let train = a.train.as_deref().map(|p| load_train(Some(p), &[])).transpose()?;
    let scenario = match &a.scenario {
        Some(s) => {
            let cfg = load_scenario(s)?;
            let reward = train.as_ref().map(|t| t.reward.clone()).unwrap_or_default();
            let env = environment(&cfg, reward)?;
            Some(ScenarioSummary {
                name: cfg.name.clone(),
                hash: cfg.hash(),
                qubits: cfg.qubits,
                actions: env.n_actions(),
                observation_len: env.observation_len(),
                student_input_len: student_input_len(&env),
                backend: env.backend_name(),
                horizon: env.horizon(),
                t_dec: env.spec.t_dec,
                t_single: env.reward.t_single,
            })
        }
        None => None,
    };
    let summary = ValidationSummary { scenario, train_config_hash: train.map(|t| t.hash()) };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[derive(Args)]
pub struct ScenariosArgs {
    /// Write every built-in scenario as `<name>.json` into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn scenarios(a: ScenariosArgs) -> Result<()> {
    for cfg in scenario::presets() {
        match &a.out {
            Some(dir) => write_file(&dir.join(format!("{}.json", cfg.name)), &(cfg.to_json() + "\n"))?,
            None => println!("{}\t{}", cfg.name, cfg.hash()),
        }
    }
    Ok(())
}
