//! Adam for gradient ascent, optionally without bias correction.

use crate::error::{QffError, Result};
use serde::{Deserialize, Serialize};

/// Added to `sqrt(v)` in the update denominator.
pub const SQRT_V_GUARD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub bias_correction: bool,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub steps: u64,
}

impl AdamState {
    pub fn new(n: usize, eta: f64, beta1: f64, beta2: f64) -> Self {
        Self { eta, beta1, beta2, bias_correction: false, m: vec![0.0; n], v: vec![0.0; n], steps: 0 }
    }

    /// `theta += eta B_n m / (sqrt(v) + guard)`; ascends along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(QffError::Shape(format!("adam: {} params, {} grads, state {}", params.len(), grad.len(), self.m.len())));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(QffError::NonFinite(format!("gradient entry {i} = {}", grad[i])));
        }
        self.steps += 1;
        let b = if self.bias_correction {
            let n = self.steps as i32;
            (1.0 - self.beta2.powi(n)).sqrt() / (1.0 - self.beta1.powi(n))
        } else {
            1.0
        };
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p += self.eta * b * *m / (v.sqrt() + SQRT_V_GUARD);
        }
        Ok(())
    }

    /// Flat `[steps, m..., v...]` blob for checkpoints.
    pub fn to_blob(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + 2 * self.m.len());
        out.push(self.steps as f64);
        out.extend(&self.m);
        out.extend(&self.v);
        out
    }

    pub fn load_blob(&mut self, blob: &[f64]) -> Result<()> {
        let n = self.m.len();
        if blob.len() != 1 + 2 * n {
            return Err(QffError::Checkpoint(format!("optimizer blob of {} entries for {n} parameters", blob.len())));
        }
        self.steps = blob[0] as u64;
        self.m.copy_from_slice(&blob[1..1 + n]);
        self.v.copy_from_slice(&blob[1 + n..]);
        Ok(())
    }
}
