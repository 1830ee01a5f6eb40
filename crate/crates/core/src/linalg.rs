//! Dense complex linear algebra helpers shared by the simulators and metrics.
//!
//! Qubit 0 is the most significant tensor factor: basis index bit `n - 1 - q`
//! belongs to qubit `q`.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Single-qubit Pauli matrix: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(k: usize) -> CMat {
    match k {
        0 => CMat::identity(2, 2),
        1 => CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("pauli index {k} out of range"),
    }
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Bit mask of qubit `q` inside an `n`-qubit basis index.
#[inline]
pub fn qubit_bit(q: usize, n: usize) -> usize {
    1 << (n - 1 - q)
}

/// Lift a single-qubit operator to the `n`-qubit space.
pub fn embed(op: &CMat, q: usize, n: usize) -> CMat {
    let d = 1usize << n;
    let bit = qubit_bit(q, n);
    let mut m = CMat::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            if (r & !bit) == (c & !bit) {
                let a = usize::from(r & bit != 0);
                let b = usize::from(c & bit != 0);
                m[(r, c)] = op[(a, b)];
            }
        }
    }
    m
}

/// Permutation matrix of CNOT(control -> target).
pub fn cnot(control: usize, target: usize, n: usize) -> CMat {
    let d = 1usize << n;
    let (cb, tb) = (qubit_bit(control, n), qubit_bit(target, n));
    let mut m = CMat::zeros(d, d);
    for c in 0..d {
        let r = if c & cb != 0 { c ^ tb } else { c };
        m[(r, c)] = ONE;
    }
    m
}

/// Projector onto the `outcome` eigenspace (0 = eigenvalue +1) of the Pauli
/// `axis` (1 = X, 2 = Y, 3 = Z) on qubit `q`.
pub fn projector(axis: usize, outcome: usize, q: usize, n: usize) -> CMat {
    let sign = if outcome == 0 { 1.0 } else { -1.0 };
    let p = (pauli(0) + pauli(axis) * re(sign)) * re(0.5);
    embed(&p, q, n)
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().sum()
}

/// (M + M†)/2.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * re(0.5)
}

/// Largest entry of |M - M†|.
pub fn hermiticity_error(m: &CMat) -> f64 {
    let mut e: f64 = 0.0;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            e = e.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    e
}

/// Eigenvalues (ascending) and column eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 2 {
        // Closed form keeps the hot 2x2 path allocation-light.
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let b = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        return vec![mean - rad, mean + rad];
    }
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Trace norm of a Hermitian matrix: sum of absolute eigenvalues.
pub fn trace_norm(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// Reduced 2x2 operator on qubit `q` (partial trace over all other qubits).
pub fn reduce_to_qubit(m: &CMat, q: usize, n: usize) -> CMat {
    let d = 1usize << n;
    let bit = qubit_bit(q, n);
    let mut r = CMat::zeros(2, 2);
    for rest in 0..d {
        if rest & bit != 0 {
            continue;
        }
        for a in 0..2 {
            for b in 0..2 {
                let i = rest | if a == 1 { bit } else { 0 };
                let j = rest | if b == 1 { bit } else { 0 };
                r[(a, b)] += m[(i, j)];
            }
        }
    }
    r
}

/// Row-major flattening: entry (a, b) lands at `a * d + b`.
pub fn vectorize(m: &CMat) -> Vec<C64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            v.push(m[(a, b)]);
        }
    }
    v
}

pub fn unvectorize(v: &[C64], d: usize) -> CMat {
    CMat::from_row_slice(d, d, v)
}

/// Basis state |b> as a column vector.
pub fn basis_ket(b: usize, d: usize) -> CMat {
    let mut v = CMat::zeros(d, 1);
    v[(b, 0)] = ONE;
    v
}
