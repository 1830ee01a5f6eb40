//! Markovian noise generators (Lindblad dissipators) as dense superoperators.

use super::superop::SuperOp;
use crate::error::{QffError, Result};
use crate::linalg::{embed, pauli, re, CMat};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Independent bit flips on every qubit.
    BitFlip,
    /// A single collective dephasing channel with per-qubit couplings.
    CorrelatedDephasing,
}

#[derive(Clone, Debug)]
pub struct NoiseGenerator {
    pub kind: NoiseKind,
    pub n_qubits: usize,
    pub t_dec: f64,
    pub moments: Vec<f64>,
    /// Dense generator on the row-major vectorization, `4^n x 4^n`.
    pub superop: CMat,
}

/// Build the dissipator `D` with `d rho/dt = D rho`.
///
/// `t_dec = +inf` yields the zero generator.
pub fn build_generator(kind: NoiseKind, n_qubits: usize, t_dec: f64, moments: &[f64]) -> Result<NoiseGenerator> {
    if n_qubits == 0 {
        return Err(QffError::InvalidParameter("n_qubits must be >= 1".into()));
    }
    if t_dec.is_nan() || t_dec <= 0.0 {
        return Err(QffError::InvalidParameter(format!("T_dec must be positive, got {t_dec}")));
    }
    let d = 1usize << n_qubits;
    let rate = 1.0 / t_dec;
    let mut gen = CMat::zeros(d * d, d * d);
    let identity = CMat::identity(d, d);
    match kind {
        NoiseKind::BitFlip => {
            let id = SuperOp::identity(d).to_dense();
            for q in 0..n_qubits {
                let x = embed(&pauli(1), q, n_qubits);
                gen += (SuperOp::sandwich(&x, &x).to_dense() - &id) * re(rate);
            }
        }
        NoiseKind::CorrelatedDephasing => {
            if moments.len() != n_qubits {
                return Err(QffError::InvalidParameter(format!(
                    "expected {n_qubits} moments, got {}",
                    moments.len()
                )));
            }
            if !(moments[0] > 0.0) {
                return Err(QffError::InvalidParameter("first moment must be positive".into()));
            }
            let norm = moments.iter().map(|m| m * m).sum::<f64>().sqrt();
            let mut l = CMat::zeros(d, d);
            for (q, &mu) in moments.iter().enumerate() {
                l += embed(&pauli(3), q, n_qubits) * re(mu / norm);
            }
            let ldl = l.adjoint() * &l;
            gen += SuperOp::sandwich(&l, &l.adjoint()).to_dense() * re(rate);
            gen -= SuperOp::sandwich(&ldl, &identity).to_dense() * re(0.5 * rate);
            gen -= SuperOp::sandwich(&identity, &ldl).to_dense() * re(0.5 * rate);
        }
    }
    let moments = match kind {
        NoiseKind::BitFlip => Vec::new(),
        NoiseKind::CorrelatedDephasing => moments.to_vec(),
    };
    Ok(NoiseGenerator { kind, n_qubits, t_dec, moments, superop: gen })
}

impl NoiseGenerator {
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// `e^{dt D}` by scaling and squaring with a Padé approximant.
    pub fn propagator(&self, dt: f64) -> SuperOp {
        let d = self.dim();
        if !self.t_dec.is_finite() || dt == 0.0 {
            return SuperOp::identity(d);
        }
        let e = (&self.superop * re(dt)).exp();
        SuperOp::from_dense(&e, d)
    }

    /// Decay time of a logical qubit stored unprotected in qubit 0.
    pub fn t_single(&self) -> f64 {
        match self.kind {
            NoiseKind::BitFlip => self.t_dec,
            NoiseKind::CorrelatedDephasing => {
                let s: f64 = self.moments.iter().map(|m| m * m).sum();
                self.t_dec * s / (self.moments[0] * self.moments[0])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{trace, C64};

    /// Independent oracle: truncated Taylor series with repeated halving.
    fn series_exp(m: &CMat) -> CMat {
        let s = 8;
        let a = m * re(1.0 / f64::from(1 << s));
        let n = a.nrows();
        let mut term = CMat::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &a * re(1.0 / k as f64);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn bit_flip_on_ground_state() {
        let g = build_generator(NoiseKind::BitFlip, 1, 7.0, &[]).unwrap();
        let rho = CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(0.0)]);
        let v = crate::linalg::vectorize(&rho);
        let out: Vec<C64> = (0..4).map(|r| (0..4).map(|c| g.superop[(r, c)] * v[c]).sum()).collect();
        assert!((out[0] - re(-1.0 / 7.0)).norm() < 1e-15);
        assert!((out[3] - re(1.0 / 7.0)).norm() < 1e-15);
    }

    #[test]
    fn propagator_matches_series_oracle() {
        for kind in [NoiseKind::BitFlip, NoiseKind::CorrelatedDephasing] {
            let g = build_generator(kind, 2, 3.0, &[1.0, 2.5]).unwrap();
            let want = series_exp(&(&g.superop * re(0.7)));
            let got = g.propagator(0.7).to_dense();
            assert!((got - want).norm() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn sigma_z_shrinks_by_decay_factor() {
        let t = 1200.0;
        let g = build_generator(NoiseKind::BitFlip, 1, t, &[]).unwrap();
        let rho = CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(0.0)]);
        let out = g.propagator(1.0).apply(&rho);
        let z = (out[(0, 0)] - out[(1, 1)]).re;
        assert!((z - (-2.0 / t).exp()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_generator(NoiseKind::BitFlip, 1, 0.0, &[]).is_err());
        assert!(build_generator(NoiseKind::BitFlip, 1, -3.0, &[]).is_err());
        assert!(build_generator(NoiseKind::CorrelatedDephasing, 2, 1.0, &[1.0]).is_err());
        assert!(build_generator(NoiseKind::CorrelatedDephasing, 2, 1.0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn bit_flip_ignores_moments() {
        let a = build_generator(NoiseKind::BitFlip, 2, 5.0, &[]).unwrap();
        let b = build_generator(NoiseKind::BitFlip, 2, 5.0, &[1.0, 3.0]).unwrap();
        assert!((a.superop - b.superop).norm() == 0.0);
    }

    #[test]
    fn t_single_scales_with_moments() {
        let g = build_generator(NoiseKind::CorrelatedDephasing, 2, 100.0, &[1.0, 4.0]).unwrap();
        assert!((g.t_single() - 1700.0).abs() < 1e-9);
    }

    #[test]
    fn trace_preserved_on_random_hermitian_inputs() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for kind in [NoiseKind::BitFlip, NoiseKind::CorrelatedDephasing] {
            let p = build_generator(kind, 2, 2.0, &[1.0, 0.4]).unwrap().propagator(0.9);
            for _ in 0..100 {
                let m = CMat::from_fn(4, 4, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
                let h = crate::linalg::hermitize(&m);
                assert!((trace(&p.apply(&h)) - trace(&h)).norm() < 1e-10);
            }
        }
    }
}
