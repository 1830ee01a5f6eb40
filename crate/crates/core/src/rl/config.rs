//! Training hyperparameters with the published defaults.

use crate::error::{QffError, Result};
use crate::reward::RewardConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub bias_correction: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { eta: 3e-4, beta1: 0.9, beta2: 0.999, bias_correction: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CgConfig {
    pub max_iterations: usize,
    pub damping: f64,
    /// Stop when the residual norm falls below `tolerance * |g|`.
    pub tolerance: f64,
    /// Estimate the Fisher matrix on at most this many evenly strided
    /// state-action samples (all samples when unset).
    pub fisher_samples: Option<usize>,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self { max_iterations: 50, damping: 1e-4, tolerance: 1e-10, fisher_samples: None }
    }
}

/// Stop once the trailing-window averages meet both targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub window: usize,
    pub max_destructive_rate: f64,
    /// Required margin of the mean final R_Q over the trivial decay value.
    pub min_rq_gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillConfig {
    pub hidden: usize,
    pub batch: usize,
    pub updates: usize,
    /// Each generated teacher trajectory is used at most this many times.
    pub reuse: usize,
    pub keep_probability: f64,
    pub adam: AdamConfig,
    pub validation_episodes: usize,
    pub validate_every: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            batch: 16,
            updates: 2000,
            reuse: 5,
            keep_probability: 0.5,
            adam: AdamConfig { eta: 1e-3, ..Default::default() },
            validation_episodes: 100,
            validate_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub hidden: Vec<usize>,
    /// Reward scale `lambda_pol`.
    pub reward_scale: f64,
    pub entropy: f64,
    /// Entropy regularization is switched off from this epoch on.
    pub entropy_off_epoch: Option<usize>,
    pub natural: bool,
    pub adam: AdamConfig,
    pub reward: RewardConfig,
    pub cg: CgConfig,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
    pub early_stop: Option<EarlyStop>,
    /// Fill the wall_time column with measured seconds instead of 0.
    pub record_wall_time: bool,
    pub distill: DistillConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch: 64,
            hidden: vec![300, 300],
            reward_scale: 4.0,
            entropy: 0.0,
            entropy_off_epoch: None,
            natural: true,
            adam: AdamConfig::default(),
            reward: RewardConfig::default(),
            cg: CgConfig::default(),
            seed: 0,
            checkpoint_every: 0,
            early_stop: None,
            record_wall_time: false,
            distill: DistillConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.reward;
        let bad = |m: &str| Err(QffError::Config(m.into()));
        if self.batch == 0 {
            return bad("batch must be >= 1");
        }
        if !(self.reward_scale > 0.0) {
            return bad("reward_scale must be positive");
        }
        if !(0.0..1.0).contains(&r.gamma) || !(0.0..1.0).contains(&r.kappa) {
            return bad("gamma and kappa must lie in [0, 1)");
        }
        if r.punish < 0.0 || self.entropy < 0.0 {
            return bad("punishment and entropy coefficients must be non-negative");
        }
        if self.cg.damping < 0.0 || self.cg.max_iterations == 0 {
            return bad("CG needs damping >= 0 and at least one iteration");
        }
        if self.distill.batch == 0 || self.distill.reuse == 0 || !(0.0..=1.0).contains(&self.distill.keep_probability) {
            return bad("invalid distillation settings");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Entropy coefficient in effect at `epoch`.
    pub fn entropy_at(&self, epoch: usize) -> f64 {
        match self.entropy_off_epoch {
            Some(off) if epoch >= off => 0.0,
            _ => self.entropy,
        }
    }
}
