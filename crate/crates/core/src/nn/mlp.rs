//! Feedforward policy: ReLU hidden layers and a softmax output, with all
//! parameters in one flat vector (per layer: row-major weights, then bias).

use super::gemm;
use super::loss::softmax_in_place;
use crate::error::{QffError, Result};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    w: usize,
    b: usize,
    inp: usize,
    out: usize,
}

/// Activations of a batched forward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    pub n: usize,
    /// `acts[0]` is the input, `acts[l]` the post-ReLU output of hidden layer `l`.
    pub acts: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl MlpCache {
    pub fn probs_row(&self, i: usize) -> &[f64] {
        let a = self.probs.len() / self.n;
        &self.probs[i * a..(i + 1) * a]
    }

    /// Output of the last hidden layer for sample `i`.
    pub fn last_hidden(&self, i: usize) -> &[f64] {
        let h = self.acts.last().expect("input layer present");
        let w = h.len() / self.n;
        &h[i * w..(i + 1) * w]
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(QffError::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self { sizes: sizes.to_vec(), params: vec![0.0; n] })
    }

    /// Fan-in scaled uniform weights, zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut m = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in m.layers() {
            let bound = 1.0 / (l.inp as f64).sqrt();
            for w in &mut m.params[l.w..l.b] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(m)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let m = Self::zeros(sizes)?;
        if params.len() != m.params.len() {
            return Err(QffError::Shape(format!("expected {} parameters, got {}", m.params.len(), params.len())));
        }
        Ok(Self { sizes: sizes.to_vec(), params })
    }

    pub fn architecture(&self) -> String {
        let s: Vec<String> = self.sizes.iter().map(|x| x.to_string()).collect();
        format!("mlp:{}", s.join("-"))
    }

    /// Layer sizes from an `mlp:a-b-c` architecture string.
    pub fn parse_architecture(arch: &str) -> Result<Vec<usize>> {
        let err = || QffError::Checkpoint(format!("not an MLP architecture: {arch}"));
        let rest = arch.strip_prefix("mlp:").ok_or_else(err)?;
        rest.split('-').map(|x| x.parse().map_err(|_| err())).collect()
    }

    pub fn from_checkpoint(ck: &super::Checkpoint) -> Result<Self> {
        Self::from_params(&Self::parse_architecture(&ck.architecture)?, ck.params.clone())
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let l = Layer { w: off, b: off + w[0] * w[1], inp: w[0], out: w[1] };
                off = l.b + w[1];
                l
            })
            .collect()
    }

    /// Forward pass over `n` row-major inputs.
    pub fn forward_batch(&self, x: &[f64], n: usize) -> Result<MlpCache> {
        if x.len() != n * self.input_size() {
            return Err(QffError::Shape(format!("input length {} != {} x {}", x.len(), n, self.input_size())));
        }
        let layers = self.layers();
        let mut acts = vec![x.to_vec()];
        let mut logits = Vec::new();
        for (li, l) in layers.iter().enumerate() {
            let mut z = vec![0.0; n * l.out];
            let bias = &self.params[l.b..l.b + l.out];
            for row in z.chunks_mut(l.out) {
                row.copy_from_slice(bias);
            }
            gemm(n, l.inp, l.out, acts.last().unwrap(), (l.inp, 1), &self.params[l.w..l.b], (1, l.inp), 1.0, &mut z);
            if li + 1 < layers.len() {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
                acts.push(z);
            } else {
                logits = z;
            }
        }
        let mut probs = logits.clone();
        for row in probs.chunks_mut(self.output_size()) {
            softmax_in_place(row);
        }
        Ok(MlpCache { n, acts, logits, probs })
    }

    /// Action probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        let c = self.forward_batch(x, 1)?;
        Ok((c.probs.clone(), c))
    }

    /// `sum_i dlogits_i^T d logits_i / d theta` for a batched cache.
    pub fn backward_batch(&self, cache: &MlpCache, dlogits: &[f64]) -> Vec<f64> {
        let n = cache.n;
        assert_eq!(dlogits.len(), n * self.output_size(), "dlogits shape");
        let layers = self.layers();
        let mut grad = vec![0.0; self.n_params()];
        let mut dz = dlogits.to_vec();
        for (li, l) in layers.iter().enumerate().rev() {
            let h = &cache.acts[li];
            gemm(l.out, n, l.inp, &dz, (1, l.out), h, (l.inp, 1), 0.0, &mut grad[l.w..l.b]);
            let db = &mut grad[l.b..l.b + l.out];
            for row in dz.chunks(l.out) {
                for (g, v) in db.iter_mut().zip(row) {
                    *g += v;
                }
            }
            if li == 0 {
                break;
            }
            let mut dh = vec![0.0; n * l.inp];
            gemm(n, l.out, l.inp, &dz, (l.out, 1), &self.params[l.w..l.b], (l.inp, 1), 0.0, &mut dh);
            for (d, &a) in dh.iter_mut().zip(h) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            dz = dh;
        }
        grad
    }

    /// Directional derivative of every logit along parameter direction `v`
    /// (forward-mode pass over the cached activations).
    pub fn jvp_logits(&self, cache: &MlpCache, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_params(), "direction length");
        let n = cache.n;
        let layers = self.layers();
        let mut rh: Option<Vec<f64>> = None;
        for (li, l) in layers.iter().enumerate() {
            let mut rz = vec![0.0; n * l.out];
            let rb = &v[l.b..l.b + l.out];
            for row in rz.chunks_mut(l.out) {
                row.copy_from_slice(rb);
            }
            gemm(n, l.inp, l.out, &cache.acts[li], (l.inp, 1), &v[l.w..l.b], (1, l.inp), 1.0, &mut rz);
            if let Some(r) = &rh {
                gemm(n, l.inp, l.out, r, (l.inp, 1), &self.params[l.w..l.b], (1, l.inp), 1.0, &mut rz);
            }
            if li + 1 < layers.len() {
                for (r, &a) in rz.iter_mut().zip(&cache.acts[li + 1]) {
                    if a <= 0.0 {
                        *r = 0.0;
                    }
                }
                rh = Some(rz);
            } else {
                return rz;
            }
        }
        unreachable!("at least one layer")
    }

    /// `d ln pi(action | x) / d theta` for a single-sample cache.
    pub fn grad_logp(&self, cache: &MlpCache, action: usize) -> Result<Vec<f64>> {
        let a = self.output_size();
        if action >= a || cache.n != 1 {
            return Err(QffError::InvalidAction(format!("action {action} of {a} (batch {})", cache.n)));
        }
        let mut d: Vec<f64> = cache.probs.iter().map(|p| -p).collect();
        d[action] += 1.0;
        Ok(self.backward_batch(cache, &d))
    }
}
