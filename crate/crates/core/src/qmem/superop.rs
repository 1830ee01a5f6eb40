//! Sparse superoperators acting on row-major vectorized density matrices.

use crate::linalg::{CMat, C64, ZERO};

/// Entries with magnitude at or below this are dropped when compressing.
const DROP_TOL: f64 = 1e-17;

/// Linear map on `d x d` matrices stored in compressed-row form over the
/// `d^2`-dimensional row-major vectorization.
#[derive(Clone, Debug)]
pub struct SuperOp {
    d: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
}

impl SuperOp {
    pub fn identity(d: usize) -> Self {
        let n = d * d;
        Self { d, row_ptr: (0..=n).collect(), cols: (0..n as u32).collect(), vals: vec![C64::new(1.0, 0.0); n] }
    }

    /// Compress a dense `d^2 x d^2` matrix.
    pub fn from_dense(m: &CMat, d: usize) -> Self {
        assert_eq!(m.nrows(), d * d);
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in 0..d * d {
            for c in 0..d * d {
                let v = m[(r, c)];
                if v.norm() > DROP_TOL {
                    cols.push(c as u32);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { d, row_ptr, cols, vals }
    }

    /// The map rho -> A rho B.
    pub fn sandwich(a: &CMat, b: &CMat) -> Self {
        let d = a.nrows();
        let nz = |m: &CMat| -> Vec<Vec<(usize, C64)>> {
            (0..d).map(|r| (0..d).filter(|&c| m[(r, c)].norm() > 0.0).map(|c| (c, m[(r, c)])).collect()).collect()
        };
        let a_rows = nz(a);
        let bt = b.transpose();
        let b_cols = nz(&bt);
        let mut row_ptr = vec![0];
        let mut entries: Vec<(u32, C64)> = Vec::new();
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for ra in 0..d {
            for cb in 0..d {
                entries.clear();
                for &(c, av) in &a_rows[ra] {
                    for &(e, bv) in &b_cols[cb] {
                        entries.push(((c * d + e) as u32, av * bv));
                    }
                }
                entries.sort_by_key(|x| x.0);
                for &(k, v) in entries.iter() {
                    cols.push(k);
                    vals.push(v);
                }
                row_ptr.push(cols.len());
            }
        }
        Self { d, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &SuperOp) -> SuperOp {
        assert_eq!(self.d, first.d);
        let n = self.d * self.d;
        let mut acc = vec![ZERO; n];
        let mut touched = vec![false; n];
        let mut list: Vec<usize> = Vec::new();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let mid = self.cols[k] as usize;
                let sv = self.vals[k];
                for j in first.row_ptr[mid]..first.row_ptr[mid + 1] {
                    let c = first.cols[j] as usize;
                    if !touched[c] {
                        touched[c] = true;
                        list.push(c);
                    }
                    acc[c] += sv * first.vals[j];
                }
            }
            list.sort_unstable();
            for &c in &list {
                if acc[c].norm() > DROP_TOL {
                    cols.push(c as u32);
                    vals.push(acc[c]);
                }
                acc[c] = ZERO;
                touched[c] = false;
            }
            list.clear();
            row_ptr.push(cols.len());
        }
        SuperOp { d: self.d, row_ptr, cols, vals }
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let d = self.d;
        debug_assert_eq!(rho.nrows(), d);
        let src: Vec<C64> = crate::linalg::vectorize(rho);
        let mut out = CMat::zeros(d, d);
        for r in 0..d * d {
            let mut s = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * src[self.cols[k] as usize];
            }
            out[(r / d, r % d)] = s;
        }
        out
    }

    /// Trace of the image, computed without forming it.
    pub fn image_trace(&self, rho: &CMat) -> C64 {
        let d = self.d;
        let mut s = ZERO;
        for a in 0..d {
            let r = a * d + a;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                s += self.vals[k] * rho[(c / d, c % d)];
            }
        }
        s
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.d * self.d;
        let mut m = CMat::zeros(n, n);
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k] as usize)] = self.vals[k];
            }
        }
        m
    }

    /// Row-major (re, im) pairs of the dense matrix, little-endian.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let m = self.to_dense();
        let n = m.nrows();
        let mut out = Vec::with_capacity(n * n * 16);
        for r in 0..n {
            for c in 0..n {
                out.extend_from_slice(&m[(r, c)].re.to_le_bytes());
                out.extend_from_slice(&m[(r, c)].im.to_le_bytes());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli, re};

    fn rand_mat(d: usize, seed: u64) -> CMat {
        let mut s = seed;
        CMat::from_fn(d, d, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn sandwich_matches_matrix_product() {
        let a = rand_mat(4, 1);
        let b = rand_mat(4, 2);
        let rho = rand_mat(4, 3);
        let s = SuperOp::sandwich(&a, &b);
        assert!((s.apply(&rho) - &a * &rho * &b).norm() < 1e-13);
    }

    #[test]
    fn compose_applies_right_factor_first() {
        let x = pauli(1);
        let z = pauli(3);
        let p = (pauli(0) + &z) * re(0.5);
        let sx = SuperOp::sandwich(&x, &x);
        let sp = SuperOp::sandwich(&p, &p);
        let rho = rand_mat(2, 7);
        let want = &x * (&p * &rho * &p) * &x;
        assert!((sx.compose(&sp).apply(&rho) - want).norm() < 1e-14);
    }

    #[test]
    fn dense_round_trip_and_trace() {
        let a = rand_mat(2, 9);
        let s = SuperOp::sandwich(&a, &a.adjoint());
        let back = SuperOp::from_dense(&s.to_dense(), 2);
        let rho = rand_mat(2, 10);
        assert!((back.apply(&rho) - s.apply(&rho)).norm() < 1e-15);
        let tr = crate::linalg::trace(&s.apply(&rho));
        assert!((s.image_trace(&rho) - tr).norm() < 1e-14);
        assert_eq!(s.to_le_bytes().len(), 16 * 16);
    }
}
