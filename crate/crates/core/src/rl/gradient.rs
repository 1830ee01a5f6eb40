//! Score-function gradients, entropy regularization and the natural-gradient
//! transform via matrix-free Fisher-vector products and conjugate gradient.
//!
//! All reductions over samples use fixed-size row chunks summed in chunk
//! order, so results are bit-identical for any rayon thread count.

use super::config::CgConfig;
use crate::error::{QffError, Result};
use crate::nn::loss::entropy_logit_grad;
use crate::nn::{Mlp, MlpCache};
use rayon::prelude::*;

const CHUNK: usize = 256;

/// Copy of rows `rows` of a batched cache.
fn cache_rows(cache: &MlpCache, rows: &[usize]) -> MlpCache {
    let pick = |v: &[f64]| -> Vec<f64> {
        let w = v.len() / cache.n;
        rows.iter().flat_map(|&r| v[r * w..(r + 1) * w].iter().copied()).collect()
    };
    MlpCache {
        n: rows.len(),
        acts: cache.acts.iter().map(|a| pick(a)).collect(),
        logits: pick(&cache.logits),
        probs: pick(&cache.probs),
    }
}

fn cache_range(cache: &MlpCache, lo: usize, hi: usize) -> MlpCache {
    let part = |v: &[f64]| {
        let w = v.len() / cache.n;
        v[lo * w..hi * w].to_vec()
    };
    MlpCache { n: hi - lo, acts: cache.acts.iter().map(|a| part(a)).collect(), logits: part(&cache.logits), probs: part(&cache.probs) }
}

/// `backward_batch` split over row chunks with an ordered reduction.
pub(crate) fn par_backward(net: &Mlp, cache: &MlpCache, dlogits: &[f64]) -> Vec<f64> {
    let a = net.output_size();
    if cache.n <= CHUNK {
        return net.backward_batch(cache, dlogits);
    }
    let parts: Vec<Vec<f64>> = (0..cache.n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let (lo, hi) = (c * CHUNK, ((c + 1) * CHUNK).min(cache.n));
            net.backward_batch(&cache_range(cache, lo, hi), &dlogits[lo * a..hi * a])
        })
        .collect();
    let mut it = parts.into_iter();
    let mut acc = it.next().unwrap_or_else(|| vec![0.0; net.n_params()]);
    for p in it {
        for (x, y) in acc.iter_mut().zip(p) {
            *x += y;
        }
    }
    acc
}

fn par_jvp(net: &Mlp, cache: &MlpCache, v: &[f64]) -> Vec<f64> {
    if cache.n <= CHUNK {
        return net.jvp_logits(cache, v);
    }
    (0..cache.n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| net.jvp_logits(&cache_range(cache, c * CHUNK, ((c + 1) * CHUNK).min(cache.n)), v))
        .collect::<Vec<_>>()
        .concat()
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(QffError::NonFinite(format!("{what} entry {i} = {}", v[i]))),
        None => Ok(()),
    }
}

/// `sum_r w_r d ln pi(a_r | s_r) / d theta` over the cached samples.
pub fn weighted_score(net: &Mlp, cache: &MlpCache, actions: &[usize], weights: &[f64]) -> Result<Vec<f64>> {
    let a_n = net.output_size();
    if actions.len() != cache.n || weights.len() != cache.n {
        return Err(QffError::Shape(format!("{} samples, {} actions, {} weights", cache.n, actions.len(), weights.len())));
    }
    check_finite(weights, "score weight")?;
    let mut d = vec![0.0; cache.n * a_n];
    for (r, row) in d.chunks_mut(a_n).enumerate() {
        let p = cache.probs_row(r);
        let w = weights[r];
        for (x, &q) in row.iter_mut().zip(p) {
            *x = -w * q;
        }
        row[actions[r]] += w;
    }
    let g = par_backward(net, cache, &d);
    check_finite(&g, "policy gradient")?;
    Ok(g)
}

/// Vanilla estimate `scale / N * sum_i sum_t (R_t - b_t) grad ln pi(a_t | s_t)`
/// for `N` trajectories stored time-major (`row = t * N + i`).
pub fn policy_gradient(
    net: &Mlp,
    cache: &MlpCache,
    actions: &[usize],
    returns: &[f64],
    baselines: &[f64],
    scale: f64,
) -> Result<Vec<f64>> {
    let horizon = baselines.len();
    if horizon == 0 || !cache.n.is_multiple_of(horizon) || returns.len() != cache.n {
        return Err(QffError::Shape(format!("{} samples, {} returns, {} baselines", cache.n, returns.len(), horizon)));
    }
    let n = cache.n / horizon;
    let w: Vec<f64> = returns.iter().enumerate().map(|(r, &ret)| scale / n as f64 * (ret - baselines[r / n])).collect();
    weighted_score(net, cache, actions, &w)
}

/// `coeff * d/d theta mean_r H(pi(. | s_r))` over the visited states.
pub fn entropy_gradient(net: &Mlp, cache: &MlpCache, coeff: f64) -> Vec<f64> {
    if coeff == 0.0 || cache.n == 0 {
        return vec![0.0; net.n_params()];
    }
    let a_n = net.output_size();
    let scale = coeff / cache.n as f64;
    let mut d = vec![0.0; cache.n * a_n];
    for (r, row) in d.chunks_mut(a_n).enumerate() {
        entropy_logit_grad(cache.probs_row(r), row);
        row.iter_mut().for_each(|x| *x *= scale);
    }
    par_backward(net, cache, &d)
}

/// Empirical Fisher product `F v = 1/M sum_r s_r (s_r . v)` with
/// `s_r = grad ln pi(a_r | s_r)`, using one forward-mode and one reverse
/// pass instead of materializing `F`.
pub fn fisher_vector_product(net: &Mlp, cache: &MlpCache, actions: &[usize], v: &[f64]) -> Vec<f64> {
    let a_n = net.output_size();
    let rl = par_jvp(net, cache, v);
    let m = cache.n as f64;
    let mut d = vec![0.0; cache.n * a_n];
    for (r, row) in d.chunks_mut(a_n).enumerate() {
        let p = cache.probs_row(r);
        let z = &rl[r * a_n..(r + 1) * a_n];
        let mean: f64 = p.iter().zip(z).map(|(q, x)| q * x).sum();
        let u = (z[actions[r]] - mean) / m;
        for (x, &q) in row.iter_mut().zip(p) {
            *x = -u * q;
        }
        row[actions[r]] += u;
    }
    par_backward(net, cache, &d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Residual norm of the returned iterate.
    pub residual: f64,
    /// `false` when the iteration cap was hit; `x` is then the iterate with
    /// the smallest residual seen.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(A + damping I) x = b` for symmetric positive semi-definite `A`
/// given as a matrix-vector product, starting from `x = 0`.
pub fn conjugate_gradient<F: FnMut(&[f64]) -> Vec<f64>>(mut apply: F, b: &[f64], cfg: &CgConfig) -> CgResult {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = cfg.tolerance * rr.sqrt();
    let mut best = (rr.sqrt(), x.clone());
    if rr.sqrt() <= target || rr == 0.0 {
        return CgResult { x, iterations: 0, residual: rr.sqrt(), converged: true };
    }
    for it in 1..=cfg.max_iterations {
        let mut ap = apply(&p);
        for (y, &q) in ap.iter_mut().zip(&p) {
            *y += cfg.damping * q;
        }
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let res = rr_new.sqrt();
        if res < best.0 {
            best = (res, x.clone());
        }
        if res <= target {
            return CgResult { x, iterations: it, residual: res, converged: true };
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    CgResult { x: best.1, iterations: cfg.max_iterations, residual: best.0, converged: false }
}

/// `(F + damping I)^{-1} g` with `F` estimated on the batch's own
/// state-action samples (optionally an evenly strided subset).
pub fn natural_gradient(net: &Mlp, cache: &MlpCache, actions: &[usize], grad: &[f64], cfg: &CgConfig) -> Result<CgResult> {
    if grad.len() != net.n_params() || actions.len() != cache.n {
        return Err(QffError::Shape("natural gradient inputs".into()));
    }
    let sub;
    let (c, acts): (&MlpCache, Vec<usize>) = match cfg.fisher_samples {
        Some(m) if m > 0 && m < cache.n => {
            let rows: Vec<usize> = (0..m).map(|k| k * cache.n / m).collect();
            let acts = rows.iter().map(|&r| actions[r]).collect();
            sub = cache_rows(cache, &rows);
            (&sub, acts)
        }
        _ => (cache, actions.to_vec()),
    };
    let res = conjugate_gradient(|v| fisher_vector_product(net, c, &acts, v), grad, cfg);
    check_finite(&res.x, "natural gradient")?;
    Ok(res)
}
