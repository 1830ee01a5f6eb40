//! The four-component logical frame: one evolved matrix per Bloch direction
//! plus the state-independent part, sharing a common normalizer.

use super::branch::CPBranch;
use crate::error::{QffError, Result};
use crate::linalg::{hermitian_eigenvalues, hermitize, kron, pauli, re, trace, CMat};

/// Steps between Hermitian re-symmetrizations.
const RESYMMETRIZE_EVERY: u32 = 50;
/// Normalizers below this are treated as a zero-probability branch.
const MIN_NORMALIZER: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct LogicalFrame {
    pub n_qubits: usize,
    pub rho0: CMat,
    /// Components for the x, y and z Bloch directions.
    pub delta: [CMat; 3],
    steps: u32,
}

impl LogicalFrame {
    /// Logical qubit in qubit 0, every other qubit prepared in |1>.
    pub fn initial(n_qubits: usize) -> Self {
        assert!(n_qubits >= 1);
        let rest_dim = 1usize << (n_qubits - 1);
        let mut rest = CMat::zeros(rest_dim, rest_dim);
        rest[(rest_dim - 1, rest_dim - 1)] = re(1.0);
        let half = re(0.5);
        let rho0 = kron(&(pauli(0) * half), &rest);
        let delta = [1, 2, 3].map(|k| kron(&(pauli(k) * half), &rest));
        Self { n_qubits, rho0, delta, steps: 0 }
    }

    pub fn from_parts(n_qubits: usize, rho0: CMat, delta: [CMat; 3]) -> Self {
        Self { n_qubits, rho0, delta, steps: 0 }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// The matrix `sum_j n_j delta_j`.
    pub fn delta_along(&self, n: [f64; 3]) -> CMat {
        &self.delta[0] * re(n[0]) + &self.delta[1] * re(n[1]) + &self.delta[2] * re(n[2])
    }

    /// Density matrix of the logical state with Bloch vector `n`.
    pub fn reconstruct(&self, n: [f64; 3]) -> CMat {
        let d = self.delta_along(n);
        let norm = 1.0 + trace(&d).re;
        (&self.rho0 + d) * re(1.0 / norm)
    }

    /// Push every component through one branch map and renormalize.
    pub fn evolve(&self, branch: &CPBranch) -> Result<LogicalFrame> {
        let image0 = branch.map.apply(&self.rho0);
        let norm = trace(&image0).re;
        if !(norm >= MIN_NORMALIZER) {
            return Err(QffError::ZeroProbabilityBranch(norm));
        }
        let inv = re(1.0 / norm);
        let steps = self.steps + 1;
        let mut rho0 = image0 * inv;
        let mut delta = [0, 1, 2].map(|j| branch.map.apply(&self.delta[j]) * inv);
        if steps.is_multiple_of(RESYMMETRIZE_EVERY) {
            rho0 = hermitize(&rho0);
            for d in delta.iter_mut() {
                *d = hermitize(d);
            }
        }
        Ok(LogicalFrame { n_qubits: self.n_qubits, rho0, delta, steps })
    }

    /// Minimum eigenvalue of the reconstructed state over a set of directions.
    pub fn min_reconstructed_eigenvalue(&self, directions: &[[f64; 3]]) -> f64 {
        directions
            .iter()
            .map(|&n| hermitian_eigenvalues(&self.reconstruct(n))[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// The 26 directions of the 3x3x3 cube surface, normalized.
pub fn cube_directions() -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for a in -1i32..=1 {
        for b in -1i32..=1 {
            for c in -1i32..=1 {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                let v = [f64::from(a), f64::from(b), f64::from(c)];
                let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                out.push([v[0] / l, v[1] / l, v[2] / l]);
            }
        }
    }
    out
}

/// Evolve one frame into a named branch; convenience for tests and scripts.
pub fn evolve_frame(frame: &LogicalFrame, branch: &CPBranch) -> Result<LogicalFrame> {
    frame.evolve(branch)
}
