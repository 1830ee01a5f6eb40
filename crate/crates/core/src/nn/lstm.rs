//! Two stacked LSTM layers with dropout on each layer's output and a dense
//! softmax head. Gate blocks are ordered input, forget, output, candidate.
//!
//! Dropout is non-inverted: training multiplies by a 0/1 mask and evaluation
//! scales by the keep probability.

use super::gemm;
use super::loss::softmax_in_place;
use crate::error::{QffError, Result};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LAYERS: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub keep: f64,
    pub params: Vec<f64>,
}

/// Recurrent state of a batch of sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub batch: usize,
    pub h: [Vec<f64>; LAYERS],
    pub c: [Vec<f64>; LAYERS],
}

/// Per-layer 0/1 dropout masks for one time step, each `batch x hidden`.
pub type StepMasks = [Vec<f64>; LAYERS];

#[derive(Clone, Debug)]
struct StepCache {
    z: [Vec<f64>; LAYERS],
    gates: [Vec<f64>; LAYERS],
    c_prev: [Vec<f64>; LAYERS],
    tc: [Vec<f64>; LAYERS],
    drop: [Vec<f64>; LAYERS],
    top: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LstmCache {
    pub batch: usize,
    /// Per-step `batch x output` probabilities.
    pub probs: Vec<Vec<f64>>,
    steps: Vec<StepCache>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Offsets {
    w: [usize; LAYERS],
    b: [usize; LAYERS],
    wo: usize,
    bo: usize,
    end: usize,
}

impl Lstm {
    fn offsets(input: usize, hidden: usize, output: usize) -> Offsets {
        let g = 4 * hidden;
        let w0 = 0;
        let b0 = w0 + g * (input + hidden);
        let w1 = b0 + g;
        let b1 = w1 + g * 2 * hidden;
        let wo = b1 + g;
        let bo = wo + output * hidden;
        Offsets { w: [w0, w1], b: [b0, b1], wo, bo, end: bo + output }
    }

    fn layout(&self) -> Offsets {
        Self::offsets(self.input, self.hidden, self.output)
    }

    fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.input
        } else {
            self.hidden
        }
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(QffError::Shape("LSTM sizes must be positive".into()));
        }
        let n = Self::offsets(input, hidden, output).end;
        Ok(Self { input, hidden, output, keep: 0.5, params: vec![0.0; n] })
    }

    /// Scaled uniform weights, forget-gate bias +1.
    pub fn init(input: usize, hidden: usize, output: usize, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(input, hidden, output)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = m.layout();
        let hsz = hidden;
        for l in 0..LAYERS {
            let cols = m.layer_in(l) + hsz;
            let bound = 1.0 / (cols as f64).sqrt();
            for w in &mut m.params[o.w[l]..o.b[l]] {
                *w = rng.random_range(-bound..bound);
            }
            for b in &mut m.params[o.b[l] + hsz..o.b[l] + 2 * hsz] {
                *b = 1.0;
            }
        }
        let bound = 1.0 / (hsz as f64).sqrt();
        for w in &mut m.params[o.wo..o.bo] {
            *w = rng.random_range(-bound..bound);
        }
        Ok(m)
    }

    pub fn from_params(input: usize, hidden: usize, output: usize, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(input, hidden, output)?;
        if params.len() != m.params.len() {
            return Err(QffError::Shape(format!("expected {} parameters, got {}", m.params.len(), params.len())));
        }
        m.params = params;
        Ok(m)
    }

    pub fn architecture(&self) -> String {
        format!("lstm:{}-{}-{}-{}", self.input, self.hidden, self.hidden, self.output)
    }

    /// `(input, hidden, output)` from an `lstm:i-h-h-o` architecture string.
    pub fn parse_architecture(arch: &str) -> Result<(usize, usize, usize)> {
        let err = || QffError::Checkpoint(format!("not an LSTM architecture: {arch}"));
        let v: Vec<usize> = arch.strip_prefix("lstm:").ok_or_else(err)?.split('-').map(|x| x.parse().map_err(|_| err())).collect::<Result<_>>()?;
        match v.as_slice() {
            &[i, h1, h2, o] if h1 == h2 => Ok((i, h1, o)),
            _ => Err(err()),
        }
    }

    pub fn from_checkpoint(ck: &super::Checkpoint) -> Result<Self> {
        let (i, h, o) = Self::parse_architecture(&ck.architecture)?;
        Self::from_params(i, h, o, ck.params.clone())
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn initial_state(&self, batch: usize) -> LstmState {
        let z = vec![0.0; batch * self.hidden];
        LstmState { batch, h: [z.clone(), z.clone()], c: [z.clone(), z] }
    }

    /// Fresh Bernoulli(keep) masks for `steps` time steps.
    pub fn sample_masks<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize, steps: usize) -> Vec<StepMasks> {
        let n = batch * self.hidden;
        (0..steps)
            .map(|_| [0, 1].map(|_| (0..n).map(|_| if rng.random::<f64>() < self.keep { 1.0 } else { 0.0 }).collect()))
            .collect()
    }

    fn step_inner(&self, state: &mut LstmState, x: &[f64], masks: Option<&StepMasks>) -> (Vec<f64>, StepCache) {
        let o = self.layout();
        let (b, h) = (state.batch, self.hidden);
        let g = 4 * h;
        let mut below = x.to_vec();
        let mut cache = StepCache {
            z: Default::default(),
            gates: Default::default(),
            c_prev: Default::default(),
            tc: Default::default(),
            drop: Default::default(),
            top: Vec::new(),
        };
        for l in 0..LAYERS {
            let inp = self.layer_in(l);
            let cols = inp + h;
            let mut z = vec![0.0; b * cols];
            for r in 0..b {
                z[r * cols..r * cols + inp].copy_from_slice(&below[r * inp..(r + 1) * inp]);
                z[r * cols + inp..(r + 1) * cols].copy_from_slice(&state.h[l][r * h..(r + 1) * h]);
            }
            let mut a = vec![0.0; b * g];
            for row in a.chunks_mut(g) {
                row.copy_from_slice(&self.params[o.b[l]..o.b[l] + g]);
            }
            gemm(b, cols, g, &z, (cols, 1), &self.params[o.w[l]..o.b[l]], (1, cols), 1.0, &mut a);
            let c_prev = state.c[l].clone();
            let mut tc = vec![0.0; b * h];
            for r in 0..b {
                let row = &mut a[r * g..(r + 1) * g];
                for k in 0..h {
                    let i = sigmoid(row[k]);
                    let f = sigmoid(row[h + k]);
                    let og = sigmoid(row[2 * h + k]);
                    let cand = row[3 * h + k].tanh();
                    row[k] = i;
                    row[h + k] = f;
                    row[2 * h + k] = og;
                    row[3 * h + k] = cand;
                    let c = f * c_prev[r * h + k] + i * cand;
                    state.c[l][r * h + k] = c;
                    tc[r * h + k] = c.tanh();
                    state.h[l][r * h + k] = og * tc[r * h + k];
                }
            }
            let drop = match masks {
                Some(m) => m[l].clone(),
                None => vec![self.keep; b * h],
            };
            below = state.h[l].iter().zip(&drop).map(|(x, d)| x * d).collect();
            cache.z[l] = z;
            cache.gates[l] = a;
            cache.c_prev[l] = c_prev;
            cache.tc[l] = tc;
            cache.drop[l] = drop;
        }
        let mut logits = vec![0.0; b * self.output];
        for row in logits.chunks_mut(self.output) {
            row.copy_from_slice(&self.params[o.bo..o.end]);
        }
        gemm(b, h, self.output, &below, (h, 1), &self.params[o.wo..o.bo], (1, h), 1.0, &mut logits);
        for row in logits.chunks_mut(self.output) {
            softmax_in_place(row);
        }
        cache.top = below;
        (logits, cache)
    }

    /// One evaluation-mode step; returns `batch x output` probabilities.
    pub fn step(&self, state: &mut LstmState, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != state.batch * self.input {
            return Err(QffError::Shape(format!("step input {} != {} x {}", x.len(), state.batch, self.input)));
        }
        Ok(self.step_inner(state, x, None).0)
    }

    /// Run whole sequences; `xs[t]` holds `batch x input`. Masks select
    /// training mode.
    pub fn forward_sequence(&self, xs: &[Vec<f64>], batch: usize, masks: Option<&[StepMasks]>) -> Result<LstmCache> {
        if let Some(m) = masks {
            if m.len() != xs.len() {
                return Err(QffError::Shape("one mask pair per time step required".into()));
            }
        }
        let mut state = self.initial_state(batch);
        let mut probs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for (t, x) in xs.iter().enumerate() {
            if x.len() != batch * self.input {
                return Err(QffError::Shape(format!("step {t} input {} != {} x {}", x.len(), batch, self.input)));
            }
            let (p, c) = self.step_inner(&mut state, x, masks.map(|m| &m[t]));
            probs.push(p);
            steps.push(c);
        }
        Ok(LstmCache { batch, probs, steps })
    }

    /// Backpropagation through time for per-step logit gradients.
    pub fn backward(&self, cache: &LstmCache, dlogits: &[Vec<f64>]) -> Vec<f64> {
        assert_eq!(dlogits.len(), cache.steps.len(), "one logit gradient per step");
        let o = self.layout();
        let (b, h, a_n) = (cache.batch, self.hidden, self.output);
        let g = 4 * h;
        let mut grad = vec![0.0; self.n_params()];
        let mut dh_rec = [vec![0.0; b * h], vec![0.0; b * h]];
        let mut dc_rec = [vec![0.0; b * h], vec![0.0; b * h]];
        let mut tmp_w = vec![0.0; g * (self.input.max(h) + h)];
        let mut tmp_wo = vec![0.0; a_n * h];
        for (t, sc) in cache.steps.iter().enumerate().rev() {
            let dl = &dlogits[t];
            gemm(a_n, b, h, dl, (1, a_n), &sc.top, (h, 1), 0.0, &mut tmp_wo);
            for (gw, v) in grad[o.wo..o.bo].iter_mut().zip(&tmp_wo) {
                *gw += v;
            }
            for row in dl.chunks(a_n) {
                for (gb, v) in grad[o.bo..o.end].iter_mut().zip(row) {
                    *gb += v;
                }
            }
            let mut dabove = vec![0.0; b * h];
            gemm(b, a_n, h, dl, (a_n, 1), &self.params[o.wo..o.bo], (h, 1), 0.0, &mut dabove);
            for l in (0..LAYERS).rev() {
                let inp = self.layer_in(l);
                let cols = inp + h;
                let gates = &sc.gates[l];
                let mut da = vec![0.0; b * g];
                for r in 0..b {
                    for k in 0..h {
                        let idx = r * h + k;
                        let dh = dabove[idx] * sc.drop[l][idx] + dh_rec[l][idx];
                        let (i, f, og, cand) = (gates[r * g + k], gates[r * g + h + k], gates[r * g + 2 * h + k], gates[r * g + 3 * h + k]);
                        let tc = sc.tc[l][idx];
                        let dc = dh * og * (1.0 - tc * tc) + dc_rec[l][idx];
                        da[r * g + k] = dc * cand * i * (1.0 - i);
                        da[r * g + h + k] = dc * sc.c_prev[l][idx] * f * (1.0 - f);
                        da[r * g + 2 * h + k] = dh * tc * og * (1.0 - og);
                        da[r * g + 3 * h + k] = dc * i * (1.0 - cand * cand);
                        dc_rec[l][idx] = dc * f;
                    }
                }
                let tw = &mut tmp_w[..g * cols];
                gemm(g, b, cols, &da, (1, g), &sc.z[l], (cols, 1), 0.0, tw);
                for (gw, v) in grad[o.w[l]..o.b[l]].iter_mut().zip(tw.iter()) {
                    *gw += v;
                }
                for row in da.chunks(g) {
                    for (gb, v) in grad[o.b[l]..o.b[l] + g].iter_mut().zip(row) {
                        *gb += v;
                    }
                }
                let mut dz = vec![0.0; b * cols];
                gemm(b, g, cols, &da, (g, 1), &self.params[o.w[l]..o.b[l]], (cols, 1), 0.0, &mut dz);
                for r in 0..b {
                    dh_rec[l][r * h..(r + 1) * h].copy_from_slice(&dz[r * cols + inp..(r + 1) * cols]);
                }
                if l > 0 {
                    for r in 0..b {
                        dabove[r * h..(r + 1) * h].copy_from_slice(&dz[r * cols..r * cols + inp]);
                    }
                }
            }
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient_5pt};

    fn seq(steps: usize, batch: usize, input: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..steps).map(|_| (0..batch * input).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn zero_params_give_uniform_outputs() {
        let m = Lstm::zeros(26, 128, 21).unwrap();
        let c = m.forward_sequence(&seq(5, 2, 26, 1), 2, None).unwrap();
        assert!(c.probs.iter().flatten().all(|&p| (p - 1.0 / 21.0).abs() < 1e-15));
        assert_eq!(m.architecture(), "lstm:26-128-128-21");
    }

    #[test]
    fn bptt_matches_differences() {
        let (inp, hid, out, steps, batch) = (3, 4, 3, 4, 2);
        let m = Lstm::init(inp, hid, out, 5).unwrap();
        let xs = seq(steps, batch, inp, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let masks = m.sample_masks(&mut rng, batch, steps);
        let targets: Vec<usize> = vec![0, 2, 1, 1, 2, 0, 1, 2];
        // Loss: sum of log-probabilities of fixed targets.
        let loss = |p: &[f64], masks: Option<&[StepMasks]>| {
            let net = Lstm::from_params(inp, hid, out, p.to_vec()).unwrap();
            let c = net.forward_sequence(&xs, batch, masks).unwrap();
            (0..steps).map(|t| (0..batch).map(|r| c.probs[t][r * out + targets[t * batch + r]].ln()).sum::<f64>()).sum::<f64>()
        };
        for mode in [Some(masks.as_slice()), None] {
            let c = m.forward_sequence(&xs, batch, mode).unwrap();
            let dl: Vec<Vec<f64>> = (0..steps)
                .map(|t| {
                    let mut d: Vec<f64> = c.probs[t].iter().map(|p| -p).collect();
                    for r in 0..batch {
                        d[r * out + targets[t * batch + r]] += 1.0;
                    }
                    d
                })
                .collect();
            let g = m.backward(&c, &dl);
            let num = numeric_gradient_5pt(|p| loss(p, mode), &m.params, 1e-2);
            let err = max_relative_error(&g, &num);
            assert!(err < 1e-5, "max relative error {err}");
        }
    }

    #[test]
    fn stepping_matches_sequence_forward() {
        let m = Lstm::init(3, 5, 4, 1).unwrap();
        let xs = seq(6, 3, 3, 2);
        let c = m.forward_sequence(&xs, 3, None).unwrap();
        let mut s = m.initial_state(3);
        for (t, x) in xs.iter().enumerate() {
            assert_eq!(m.step(&mut s, x).unwrap(), c.probs[t]);
        }
    }

    #[test]
    fn dropout_expectation_matches_rescaled_output() {
        // Single-layer-deep effect: the head sees mask * h, evaluation sees keep * h.
        let m = Lstm::init(2, 3, 2, 4).unwrap();
        let xs = seq(1, 1, 2, 5);
        let eval = m.forward_sequence(&xs, 1, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let o = m.layout();
        // Compare pre-softmax head inputs: mean of masked top activations.
        let mut mean_top = [0.0; 3];
        let n = 100_000;
        for _ in 0..n {
            let masks = m.sample_masks(&mut rng, 1, 1);
            let mut s = m.initial_state(1);
            // Fix the lower mask to evaluation scaling so only the top mask varies.
            let fixed = [vec![m.keep; 3], masks[0][1].clone()];
            let (_, c) = m.step_inner(&mut s, &xs[0], Some(&fixed));
            for (a, b) in mean_top.iter_mut().zip(&c.top) {
                *a += b / n as f64;
            }
        }
        let mut s = m.initial_state(1);
        let (_, c) = m.step_inner(&mut s, &xs[0], None);
        for (a, b) in mean_top.iter().zip(&c.top) {
            assert!((a - b).abs() <= 0.01 * b.abs(), "{a} vs {b}");
        }
        assert!(o.end == m.n_params() && eval.probs.len() == 1);
    }
}
