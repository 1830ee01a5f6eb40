//! Policies that can drive batched rollouts.

use crate::error::{QffError, Result};
use crate::nn::{Mlp, MlpCache};

/// Maps a batch of observations at time `t` to action distributions.
pub trait BatchPolicy: Sync {
    fn n_actions(&self) -> usize;

    fn architecture(&self) -> String;

    /// Expected observation length, when the policy reads observations.
    fn input_size(&self) -> Option<usize> {
        None
    }

    /// Row-major `n x n_actions` probabilities, plus the network cache when
    /// the policy is differentiable.
    fn probs(&self, obs: &[f64], n: usize, t: usize) -> Result<(Vec<f64>, Option<MlpCache>)>;
}

/// A policy used as distillation teacher.
pub trait Teacher: BatchPolicy {}

impl<T: BatchPolicy> Teacher for T {}

impl BatchPolicy for Mlp {
    fn n_actions(&self) -> usize {
        self.output_size()
    }

    fn architecture(&self) -> String {
        Mlp::architecture(self)
    }

    fn input_size(&self) -> Option<usize> {
        Some(Mlp::input_size(self))
    }

    fn probs(&self, obs: &[f64], n: usize, _t: usize) -> Result<(Vec<f64>, Option<MlpCache>)> {
        let c = self.forward_batch(obs, n)?;
        Ok((c.probs.clone(), Some(c)))
    }
}

/// Open-loop schedule: a prefix followed by a repeating cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedPolicy {
    pub n_actions: usize,
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

impl ScriptedPolicy {
    pub fn new(n_actions: usize, prefix: Vec<usize>, cycle: Vec<usize>) -> Result<Self> {
        if cycle.is_empty() || prefix.iter().chain(&cycle).any(|&a| a >= n_actions) {
            return Err(QffError::Config("scripted policy needs a non-empty cycle of valid actions".into()));
        }
        Ok(Self { n_actions, prefix, cycle })
    }

    pub fn action_at(&self, t: usize) -> usize {
        match self.prefix.get(t) {
            Some(&a) => a,
            None => self.cycle[(t - self.prefix.len()) % self.cycle.len()],
        }
    }

    /// Inverse of [`BatchPolicy::architecture`].
    pub fn parse(arch: &str) -> Result<Self> {
        let err = || QffError::Checkpoint(format!("not a scripted policy: {arch}"));
        let rest = arch.strip_prefix("scripted:periodic:").ok_or_else(err)?;
        let parts: Vec<&str> = rest.split(':').collect();
        let [n, prefix, cycle] = parts.as_slice() else { return Err(err()) };
        let list = |s: &str| -> Result<Vec<usize>> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',').map(|x| x.parse().map_err(|_| err())).collect()
        };
        Self::new(n.parse().map_err(|_| err())?, list(prefix)?, list(cycle)?)
    }
}

impl BatchPolicy for ScriptedPolicy {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn architecture(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",");
        format!("scripted:periodic:{}:{}:{}", self.n_actions, join(&self.prefix), join(&self.cycle))
    }

    fn probs(&self, _obs: &[f64], n: usize, t: usize) -> Result<(Vec<f64>, Option<MlpCache>)> {
        let mut p = vec![0.0; n * self.n_actions];
        let a = self.action_at(t);
        for row in p.chunks_mut(self.n_actions) {
            row[a] = 1.0;
        }
        Ok((p, None))
    }
}
