//! Stabilizer-diagonal execution backend for circuits built from CNOTs, flips
//! and z-measurements under bit-flip noise.
//!
//! For each Bloch axis `j` the two unnormalized states `rho0 ± delta_j` are
//! mixtures of stabilizer states sharing one abelian Pauli group. We store
//! the group generators and the two diagonals in its eigenbasis; index `s`
//! has bit `k` set when generator `k` has eigenvalue -1. Gates conjugate the
//! generators, bit flips mix pairs of eigenstates, and z-measurements either
//! reweight eigenstates or swap one generator for the measured observable.

use crate::action::{Action, Axis};
use crate::error::{QffError, Result};
use crate::linalg::{re, CMat, C64, ZERO};
use crate::pauli::PauliWord;
use crate::qmem::{LogicalFrame, NoiseGenerator, NoiseKind, BIAS_THRESHOLD, MIN_BRANCH_PROBABILITY};

const SUPPORT_TOL: f64 = 1e-10;
const RECONSTRUCT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ChzAxis {
    pub gens: Vec<PauliWord>,
    /// Diagonal of `rho0 + delta_j`.
    pub plus: Vec<f64>,
    /// Diagonal of `rho0 - delta_j`.
    pub minus: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChzFrame {
    pub n_qubits: usize,
    pub axes: [ChzAxis; 3],
}

/// Bit-flip probability per qubit for one time step.
#[derive(Clone, Copy, Debug)]
pub struct ChzNoise {
    pub flip_probability: f64,
}

impl ChzNoise {
    pub fn from_generator(generator: &NoiseGenerator, dt: f64) -> Result<Self> {
        if generator.kind != NoiseKind::BitFlip {
            return Err(QffError::Unsupported("stabilizer backend requires bit-flip noise".into()));
        }
        let p = if generator.t_dec.is_finite() { 0.5 * (1.0 - (-2.0 * dt / generator.t_dec).exp()) } else { 0.0 };
        Ok(Self { flip_probability: p })
    }
}

#[derive(Clone, Debug)]
pub struct ChzBranch {
    pub outcome: Option<usize>,
    pub probability: f64,
    /// `None` when the branch probability is below the sampling cutoff.
    pub frame: Option<ChzFrame>,
}

fn popcount_parity(x: usize) -> bool {
    x.count_ones() % 2 == 1
}

impl ChzAxis {
    /// Product of the generators selected by `mask`.
    pub fn group_element(&self, mask: usize) -> PauliWord {
        let mut w = PauliWord::IDENTITY;
        for (k, g) in self.gens.iter().enumerate() {
            if mask >> k & 1 == 1 {
                w = w.mul(g);
            }
        }
        w
    }

    /// Write `w = (-1)^neg prod_{k in mask} g_k` if `w` lies in the group.
    fn decompose(&self, w: &PauliWord) -> Option<(usize, bool)> {
        (0..1usize << self.gens.len()).find_map(|mask| {
            let e = self.group_element(mask);
            (e.x == w.x && e.z == w.z).then_some((mask, e.neg != w.neg))
        })
    }

    fn conjugate(&mut self, f: impl Fn(&mut PauliWord)) {
        for g in self.gens.iter_mut() {
            f(g);
        }
    }

    fn bit_flip_noise(&mut self, n: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        for q in 0..n {
            let bit = 1u32 << (n - 1 - q);
            let a: usize = self.gens.iter().enumerate().filter(|(_, g)| g.z & bit != 0).map(|(k, _)| 1 << k).sum();
            if a == 0 {
                continue;
            }
            for diag in [&mut self.plus, &mut self.minus] {
                let old = diag.clone();
                for s in 0..old.len() {
                    diag[s] = (1.0 - p) * old[s] + p * old[s ^ a];
                }
            }
        }
    }

    /// Apply `sum_k w_k P_k rho P_k` for a z-measurement on `q` where
    /// `weight(k)` is the readout weight of true outcome `k`.
    fn measure_z(&mut self, q: usize, n: usize, weight: impl Fn(usize) -> f64) {
        let zq = PauliWord::single(q, n, 3);
        let anti: Vec<usize> = (0..self.gens.len()).filter(|&k| !self.gens[k].commutes(&zq)).collect();
        if anti.is_empty() {
            let (mask, neg) = self.decompose(&zq).expect("commuting Pauli lies in a maximal abelian group");
            for diag in [&mut self.plus, &mut self.minus] {
                for (s, d) in diag.iter_mut().enumerate() {
                    let outcome = usize::from(popcount_parity(mask & s) != neg);
                    *d *= weight(outcome);
                }
            }
            return;
        }
        let p = anti[0];
        let mut relabel = 0usize;
        for &k in &anti[1..] {
            self.gens[k] = self.gens[k].mul(&self.gens[p]);
            relabel |= 1 << k;
        }
        self.gens[p] = zq;
        let pb = 1usize << p;
        for diag in [&mut self.plus, &mut self.minus] {
            let old = diag.clone();
            let mut permuted = vec![0.0; old.len()];
            for (s, &v) in old.iter().enumerate() {
                let t = if s & pb != 0 { s ^ relabel } else { s };
                permuted[t] = v;
            }
            for s in 0..old.len() {
                let outcome = usize::from(s & pb != 0);
                diag[s] = weight(outcome) * 0.5 * (permuted[s] + permuted[s ^ pb]);
            }
        }
    }

    fn scale(&mut self, c: f64) {
        for v in self.plus.iter_mut().chain(self.minus.iter_mut()) {
            *v *= c;
        }
    }

    fn trace_half_sum(&self) -> f64 {
        0.5 * (self.plus.iter().sum::<f64>() + self.minus.iter().sum::<f64>())
    }

    /// Dense matrix `sum_s d(s) |s><s|`.
    fn dense(&self, diag: &[f64], n: usize) -> CMat {
        let d = 1usize << n;
        let mut m = CMat::zeros(d, d);
        for mask in 0..d {
            let c: f64 = diag.iter().enumerate().map(|(s, &v)| if popcount_parity(mask & s) { -v } else { v }).sum();
            if c == 0.0 {
                continue;
            }
            m += self.group_element(mask).to_dense(n) * re(c / d as f64);
        }
        m
    }

    /// `tr(W D)` for `D = sum_s c(s)|s><s|`, zero unless `W` is in the group.
    fn pauli_trace(&self, w: &PauliWord, diag: &[f64]) -> f64 {
        match self.decompose(w) {
            None => 0.0,
            Some((mask, neg)) => diag
                .iter()
                .enumerate()
                .map(|(s, &v)| if popcount_parity(mask & s) != neg { -v } else { v })
                .sum(),
        }
    }

    /// Normalized joint eigenvector for syndrome `s`.
    pub fn eigenvector(&self, s: usize, n: usize) -> Vec<C64> {
        let d = 1usize << n;
        for b in 0..d {
            let mut v = vec![ZERO; d];
            v[b] = C64::new(1.0, 0.0);
            for (k, g) in self.gens.iter().enumerate() {
                let sign = if s >> k & 1 == 1 { -1.0 } else { 1.0 };
                let mut gv = vec![ZERO; d];
                for (a, &va) in v.iter().enumerate() {
                    if va != ZERO {
                        gv[a ^ g.x as usize] += g.apply_phase(a) * va;
                    }
                }
                for a in 0..d {
                    v[a] = (v[a] + gv[a] * sign) * 0.5;
                }
            }
            let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                return v.into_iter().map(|c| c / norm).collect();
            }
        }
        unreachable!("stabilizer group with {} generators has an empty eigenspace", self.gens.len())
    }
}

/// Basis of the GF(2) span used for independence checks.
#[derive(Default)]
struct XorBasis(Vec<u64>);

impl XorBasis {
    fn reduce(&self, mut v: u64) -> u64 {
        for &b in &self.0 {
            v = v.min(v ^ b);
        }
        v
    }
    fn insert(&mut self, v: u64) -> bool {
        let r = self.reduce(v);
        if r == 0 {
            return false;
        }
        self.0.push(r);
        self.0.sort_unstable_by(|a, b| b.cmp(a));
        true
    }
}

fn word_bits(w: &PauliWord) -> u64 {
    (u64::from(w.x) << 32) | u64::from(w.z)
}

impl ChzFrame {
    /// Logical qubit in qubit 0, all other qubits in |1>.
    pub fn initial(n: usize) -> Self {
        let d = 1usize << n;
        let axes = [1, 2, 3].map(|k| {
            let mut gens = vec![PauliWord::single(0, n, k)];
            gens.extend((1..n).map(|q| PauliWord::single(q, n, 3).negated()));
            let mut plus = vec![0.0; d];
            let mut minus = vec![0.0; d];
            plus[0] = 1.0;
            minus[1] = 1.0;
            ChzAxis { gens, plus, minus }
        });
        Self { n_qubits: n, axes }
    }

    /// Compress a dense frame, detecting the stabilizer structure.
    pub fn from_dense(frame: &LogicalFrame) -> Result<Self> {
        let n = frame.n_qubits;
        if n > 8 {
            return Err(QffError::Unsupported("stabilizer backend supports at most 8 qubits".into()));
        }
        let d = 1usize << n;
        let words: Vec<PauliWord> = (0..d as u32)
            .flat_map(|x| (0..d as u32).map(move |z| PauliWord { x, z, neg: false }))
            .filter(|w| !w.is_identity())
            .collect();
        let mut axes = Vec::with_capacity(3);
        for j in 0..3 {
            let plus_m = &frame.rho0 + &frame.delta[j];
            let minus_m = &frame.rho0 - &frame.delta[j];
            let support: Vec<PauliWord> = words
                .iter()
                .copied()
                .filter(|w| w.trace_with(&plus_m).norm() > SUPPORT_TOL || w.trace_with(&minus_m).norm() > SUPPORT_TOL)
                .collect();
            for (i, a) in support.iter().enumerate() {
                if let Some(b) = support[i + 1..].iter().find(|b| !a.commutes(b)) {
                    return Err(QffError::NotStabilizer(format!(
                        "axis {j}: {} and {} anticommute",
                        a.to_string(n),
                        b.to_string(n)
                    )));
                }
            }
            let mut basis = XorBasis::default();
            let mut gens: Vec<PauliWord> = Vec::new();
            for w in support.iter().chain(words.iter().filter(|w| w.x == 0)).chain(words.iter()) {
                if gens.len() == n {
                    break;
                }
                if gens.iter().all(|g| g.commutes(w)) && basis.insert(word_bits(w)) {
                    gens.push(*w);
                }
            }
            let mut axis = ChzAxis { gens, plus: vec![0.0; d], minus: vec![0.0; d] };
            for (m, diag) in [(&plus_m, 0), (&minus_m, 1)] {
                let mut coeffs = vec![0.0; d];
                for (mask, c) in coeffs.iter_mut().enumerate() {
                    let t = axis.group_element(mask).trace_with(m);
                    if t.im.abs() > RECONSTRUCT_TOL {
                        return Err(QffError::NotStabilizer(format!("axis {j}: complex stabilizer expectation")));
                    }
                    *c = t.re;
                }
                let out: Vec<f64> = (0..d)
                    .map(|s| {
                        coeffs
                            .iter()
                            .enumerate()
                            .map(|(mask, &c)| if popcount_parity(mask & s) { -c } else { c })
                            .sum::<f64>()
                            / d as f64
                    })
                    .collect();
                if diag == 0 {
                    axis.plus = out;
                } else {
                    axis.minus = out;
                }
            }
            let err = (axis.dense(&axis.plus, n) - &plus_m).norm() + (axis.dense(&axis.minus, n) - &minus_m).norm();
            if err > RECONSTRUCT_TOL {
                return Err(QffError::NotStabilizer(format!("axis {j}: residual {err:e}")));
            }
            axes.push(axis);
        }
        let axes: [ChzAxis; 3] = axes.try_into().expect("three axes");
        Ok(Self { n_qubits: n, axes })
    }

    pub fn to_dense(&self) -> LogicalFrame {
        let n = self.n_qubits;
        let z = &self.axes[2];
        let rho0 = (z.dense(&z.plus, n) + z.dense(&z.minus, n)) * re(0.5);
        let delta = [0, 1, 2].map(|j| {
            let a = &self.axes[j];
            (a.dense(&a.plus, n) - a.dense(&a.minus, n)) * re(0.5)
        });
        LogicalFrame::from_parts(n, rho0, delta)
    }

    /// `||delta_j||_1` for each axis.
    pub fn axis_norms(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| {
            let a = &self.axes[j];
            0.5 * a.plus.iter().zip(&a.minus).map(|(p, m)| (p - m).abs()).sum::<f64>()
        })
    }

    /// Recoverable quantum information (exact axis minimum) and minimizer.
    pub fn recoverable_q_info(&self) -> (f64, [f64; 3]) {
        let norms = self.axis_norms();
        let j = (0..3).min_by(|&a, &b| norms[a].total_cmp(&norms[b])).unwrap();
        let mut n = [0.0; 3];
        n[j] = 1.0;
        (norms[j], n)
    }

    /// Bias vector of a z-measurement on `qubit`.
    pub fn measurement_bias(&self, qubit: usize) -> ([f64; 3], bool) {
        let zq = PauliWord::single(qubit, self.n_qubits, 3);
        let b = [0, 1, 2].map(|j| {
            let a = &self.axes[j];
            0.5 * (a.pauli_trace(&zq, &a.plus) - a.pauli_trace(&zq, &a.minus))
        });
        let destructive = b.iter().any(|x| x.abs() > BIAS_THRESHOLD);
        (b, destructive)
    }

    /// Per-qubit flag: nonvanishing partial trace of some `delta_j`.
    pub fn qubit_info_flags(&self) -> Vec<bool> {
        let n = self.n_qubits;
        let d = 1usize << n;
        let mut flags = vec![false; n];
        for a in &self.axes {
            let c: Vec<f64> = a.plus.iter().zip(&a.minus).map(|(p, m)| 0.5 * (p - m)).collect();
            // Coefficients on I, X, Y, Z of each single-qubit reduction.
            let mut red = vec![[0.0f64; 4]; n];
            for mask in 0..d {
                let w = a.group_element(mask);
                let coeff: f64 = c.iter().enumerate().map(|(s, &v)| if popcount_parity(mask & s) { -v } else { v }).sum();
                let coeff = if w.neg { -coeff } else { coeff };
                if w.is_identity() {
                    for r in red.iter_mut() {
                        r[0] += coeff;
                    }
                    continue;
                }
                let support = w.x | w.z;
                if support.count_ones() == 1 {
                    let q = n - 1 - support.trailing_zeros() as usize;
                    let k = match (w.x != 0, w.z != 0) {
                        (true, false) => 1,
                        (true, true) => 2,
                        _ => 3,
                    };
                    red[q][k] += coeff;
                }
            }
            for (q, r) in red.iter().enumerate() {
                let vec_norm = (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt();
                if r[0].abs().max(vec_norm) > crate::metrics::FLAG_THRESHOLD {
                    flags[q] = true;
                }
            }
        }
        flags
    }

    /// Eigenpairs of `rho0` (index 0) or `rho0 + delta_j` (index j + 1).
    pub fn eigenpairs(&self, matrix: usize) -> Vec<(f64, usize, &ChzAxis)> {
        let (axis, diag): (&ChzAxis, Vec<f64>) = if matrix == 0 {
            let z = &self.axes[2];
            (z, z.plus.iter().zip(&z.minus).map(|(p, m)| 0.5 * (p + m)).collect())
        } else {
            let a = &self.axes[matrix - 1];
            (a, a.plus.clone())
        };
        diag.into_iter().enumerate().map(|(s, v)| (v, s, axis)).collect()
    }
}

/// One step of the stabilizer backend; branches ordered like the dense path.
pub fn chz_step(frame: &ChzFrame, action: &Action, noise: &ChzNoise, msmt_error: f64) -> Result<Vec<ChzBranch>> {
    let n = frame.n_qubits;
    if let Some(q) = action.max_qubit() {
        if q >= n {
            return Err(QffError::InvalidAction(format!("{action} addresses qubit {q} of {n}")));
        }
    }
    let finish = |mut f: ChzFrame, outcome: Option<usize>| -> ChzBranch {
        for a in f.axes.iter_mut() {
            a.bit_flip_noise(n, noise.flip_probability);
        }
        ChzBranch { outcome, probability: 1.0, frame: Some(f) }
    };
    match *action {
        Action::Idle => Ok(vec![finish(frame.clone(), None)]),
        Action::Cnot { control, target } => {
            if control == target {
                return Err(QffError::InvalidAction(format!("{action} has identical endpoints")));
            }
            let mut f = frame.clone();
            for a in f.axes.iter_mut() {
                a.conjugate(|g| g.conjugate_cnot(control, target, n));
            }
            Ok(vec![finish(f, None)])
        }
        Action::Flip { qubit } => {
            let mut f = frame.clone();
            for a in f.axes.iter_mut() {
                a.conjugate(|g| g.conjugate_flip(qubit, n));
            }
            Ok(vec![finish(f, None)])
        }
        Action::Measure { qubit, axis: Axis::Z } => {
            let mut out = Vec::with_capacity(2);
            for j in 0..2 {
                let weight = |k: usize| if k == j { 1.0 - msmt_error } else { msmt_error };
                let mut f = frame.clone();
                for a in f.axes.iter_mut() {
                    a.measure_z(qubit, n, weight);
                }
                let p = f.axes[2].trace_half_sum();
                if p < MIN_BRANCH_PROBABILITY {
                    out.push(ChzBranch { outcome: Some(j), probability: p.max(0.0), frame: None });
                    continue;
                }
                for a in f.axes.iter_mut() {
                    a.scale(1.0 / p);
                }
                let mut b = finish(f, Some(j));
                b.probability = p;
                out.push(b);
            }
            Ok(out)
        }
        Action::Measure { .. } => Err(QffError::Unsupported(format!("{action} is outside the CNOT/flip/z class"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli;
    use crate::metrics::{qubit_info_flags, recoverable_q_info, RqMethod};
    use crate::qmem::{build_generator, measurement_bias, step_maps_with, CPBranch, SuperOp};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frames_close(a: &LogicalFrame, b: &LogicalFrame, tol: f64) -> bool {
        (&a.rho0 - &b.rho0).norm() < tol && (0..3).all(|j| (&a.delta[j] - &b.delta[j]).norm() < tol)
    }

    #[test]
    fn initial_matches_dense() {
        for n in 1..=4 {
            let c = ChzFrame::initial(n);
            assert!(frames_close(&c.to_dense(), &LogicalFrame::initial(n), 1e-14));
            let back = ChzFrame::from_dense(&LogicalFrame::initial(n)).unwrap();
            for j in 0..3 {
                assert!(back.axes[j].plus.iter().filter(|v| v.abs() > 1e-12).count() <= 2);
                assert!(frames_close(&back.to_dense(), &c.to_dense(), 1e-12));
            }
        }
    }

    #[test]
    fn initial_detects_ancilla_z_stabilizers() {
        let c = ChzFrame::from_dense(&LogicalFrame::initial(4)).unwrap();
        for a in &c.axes {
            let z_only = a.gens.iter().filter(|g| g.x == 0 && (g.z & 0b0111) != 0 && g.z & 0b1000 == 0).count();
            assert_eq!(z_only, 3);
        }
    }

    #[test]
    fn rotated_frame_is_rejected() {
        let f = LogicalFrame::initial(2);
        let th: f64 = 0.3;
        let ry = (pauli(0) * re((th / 2.0).cos()) - pauli(2) * C64::new(0.0, (th / 2.0).sin())).kronecker(&pauli(0));
        let map = CPBranch { outcome: None, label: "unitary", map: SuperOp::sandwich(&ry, &ry.adjoint()) };
        let g = f.evolve(&map).unwrap();
        assert!(matches!(ChzFrame::from_dense(&g), Err(QffError::NotStabilizer(_))));
    }

    fn random_chz_action(rng: &mut ChaCha8Rng, n: usize) -> Action {
        match rng.random_range(0..4) {
            0 => {
                let c = rng.random_range(0..n);
                let mut t = rng.random_range(0..n - 1);
                if t >= c {
                    t += 1;
                }
                Action::Cnot { control: c, target: t }
            }
            1 => Action::Flip { qubit: rng.random_range(0..n) },
            2 => Action::Measure { qubit: rng.random_range(0..n), axis: Axis::Z },
            _ => Action::Idle,
        }
    }

    #[test]
    fn random_sequences_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..60 {
            let n = 2 + trial % 3;
            let eps = if trial % 4 == 0 { 0.05 } else { 0.0 };
            let gen = build_generator(NoiseKind::BitFlip, n, 15.0, &[]).unwrap();
            let noise = ChzNoise::from_generator(&gen, 1.0).unwrap();
            let prop = gen.propagator(1.0);
            let mut dense = LogicalFrame::initial(n);
            let mut chz = ChzFrame::initial(n);
            for _ in 0..20 {
                let a = random_chz_action(&mut rng, n);
                let db = step_maps_with(&a, n, &prop, eps).unwrap();
                let cb = chz_step(&chz, &a, &noise, eps).unwrap();
                let probs: Vec<f64> = db.iter().map(|b| b.probability(&dense)).collect();
                for (p, c) in probs.iter().zip(&cb) {
                    assert!((p - c.probability).abs() < 1e-10);
                }
                let pick = (0..probs.len()).find(|&i| probs[i] > 0.3).unwrap();
                dense = dense.evolve(&db[pick]).unwrap();
                chz = cb[pick].frame.clone().unwrap();
                assert!(frames_close(&dense, &chz.to_dense(), 1e-10), "trial {trial} after {a}");
                let rq = recoverable_q_info(&dense, RqMethod::Axis).unwrap().0;
                assert!((rq - chz.recoverable_q_info().0).abs() < 1e-10);
                assert_eq!(qubit_info_flags(&dense), chz.qubit_info_flags());
                for q in 0..n {
                    let m = Action::Measure { qubit: q, axis: Axis::Z };
                    let (bd, fd) = measurement_bias(&dense, &m).unwrap();
                    let (bc, fc) = chz.measurement_bias(q);
                    assert_eq!(fd, fc);
                    assert!((0..3).all(|j| (bd[j] - bc[j]).abs() < 1e-10));
                }
            }
            let back = ChzFrame::from_dense(&dense).unwrap();
            assert!(frames_close(&back.to_dense(), &dense, 1e-9));
        }
    }

    #[test]
    fn anticommutator_vanishes_along_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gen = build_generator(NoiseKind::BitFlip, 3, 10.0, &[]).unwrap();
        let noise = ChzNoise::from_generator(&gen, 1.0).unwrap();
        let mut chz = ChzFrame::initial(3);
        for _ in 0..30 {
            let a = random_chz_action(&mut rng, 3);
            let br = chz_step(&chz, &a, &noise, 0.0).unwrap();
            let i = br.iter().position(|b| b.frame.is_some()).unwrap();
            chz = br[i].frame.clone().unwrap();
            let f = chz.to_dense();
            for j in 0..3 {
                for k in 0..3 {
                    if j != k {
                        let ac = &f.delta[j] * &f.delta[k] + &f.delta[k] * &f.delta[j];
                        assert!(ac.norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn eigenvectors_diagonalize() {
        let f = ChzFrame::initial(3);
        let a = &f.axes[0];
        for s in 0..8 {
            let v = a.eigenvector(s, 3);
            for (k, g) in a.gens.iter().enumerate() {
                let gm = g.to_dense(3);
                let col = CMat::from_column_slice(8, 1, &v);
                let want = if s >> k & 1 == 1 { -1.0 } else { 1.0 };
                assert!((&gm * &col - &col * re(want)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn correlated_noise_rejected() {
        let g = build_generator(NoiseKind::CorrelatedDephasing, 2, 10.0, &[1.0, 2.0]).unwrap();
        assert!(ChzNoise::from_generator(&g, 1.0).is_err());
        let noise = ChzNoise { flip_probability: 0.0 };
        let f = ChzFrame::initial(2);
        assert!(chz_step(&f, &Action::Measure { qubit: 1, axis: Axis::X }, &noise, 0.0).is_err());
        let same = chz_step(&f, &Action::Idle, &noise, 0.0).unwrap();
        assert_eq!(same[0].frame.as_ref().unwrap(), &f);
    }
}
