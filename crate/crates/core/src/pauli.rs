//! Hermitian Pauli strings as paired bitmasks with a sign bit.
//!
//! A word `(x, z, neg)` denotes `(-1)^neg * prod_q s(x_q, z_q)` with
//! s(1,0) = X, s(0,1) = Z, s(1,1) = Y. Bit `n - 1 - q` belongs to qubit `q`,
//! matching the basis-index convention of [`crate::linalg`].

use crate::linalg::{CMat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliWord {
    pub x: u32,
    pub z: u32,
    pub neg: bool,
}

impl PauliWord {
    pub const IDENTITY: PauliWord = PauliWord { x: 0, z: 0, neg: false };

    pub fn single(q: usize, n: usize, pauli: usize) -> Self {
        let bit = 1u32 << (n - 1 - q);
        match pauli {
            1 => PauliWord { x: bit, z: 0, neg: false },
            2 => PauliWord { x: bit, z: bit, neg: false },
            3 => PauliWord { x: 0, z: bit, neg: false },
            _ => PauliWord::IDENTITY,
        }
    }

    pub fn negated(self) -> Self {
        PauliWord { neg: !self.neg, ..self }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn commutes(&self, other: &PauliWord) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Power of `i` in `i^k X^x Z^z` form.
    fn phase_power(&self) -> u32 {
        (2 * u32::from(self.neg) + (self.x & self.z).count_ones()) % 4
    }

    /// Product of two commuting words (again Hermitian).
    pub fn mul(&self, other: &PauliWord) -> PauliWord {
        debug_assert!(self.commutes(other));
        let k = self.phase_power() + other.phase_power() + 2 * (self.z & other.x).count_ones();
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let rel = (k + 4 - (x & z).count_ones() % 4) % 4;
        debug_assert!(rel.is_multiple_of(2));
        PauliWord { x, z, neg: rel == 2 }
    }

    /// `W|b> = phase * |b ^ x>`; returns the phase.
    pub fn apply_phase(&self, b: usize) -> C64 {
        let k = (self.phase_power() + 2 * (self.z & b as u32).count_ones()) % 4;
        [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)][k as usize]
    }

    /// `tr(W m)` in O(2^n).
    pub fn trace_with(&self, m: &CMat) -> C64 {
        let d = m.nrows();
        (0..d).map(|a| self.apply_phase(a) * m[(a, a ^ self.x as usize)]).sum()
    }

    /// Conjugation by CNOT(control -> target).
    pub fn conjugate_cnot(&mut self, control: usize, target: usize, n: usize) {
        let c = n - 1 - control;
        let t = n - 1 - target;
        let xc = (self.x >> c) & 1;
        let zc = (self.z >> c) & 1;
        let xt = (self.x >> t) & 1;
        let zt = (self.z >> t) & 1;
        if xc & zt & (xt ^ zc ^ 1) == 1 {
            self.neg = !self.neg;
        }
        self.x ^= xc << t;
        self.z ^= zt << c;
    }

    /// Conjugation by X on qubit `q`.
    pub fn conjugate_flip(&mut self, q: usize, n: usize) {
        if (self.z >> (n - 1 - q)) & 1 == 1 {
            self.neg = !self.neg;
        }
    }

    pub fn to_dense(&self, n: usize) -> CMat {
        let d = 1usize << n;
        let mut m = CMat::zeros(d, d);
        for b in 0..d {
            m[(b ^ self.x as usize, b)] = self.apply_phase(b);
        }
        m
    }

    pub fn to_string(&self, n: usize) -> String {
        let mut s = String::from(if self.neg { "-" } else { "+" });
        for q in 0..n {
            let bit = 1u32 << (n - 1 - q);
            s.push(match (self.x & bit != 0, self.z & bit != 0) {
                (false, false) => 'I',
                (true, false) => 'X',
                (true, true) => 'Y',
                (false, true) => 'Z',
            });
        }
        s
    }
}
