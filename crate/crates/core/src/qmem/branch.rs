//! Per-action completely positive branch maps, outcome sampling and the
//! measurement bias used to flag destructive measurements.

use super::frame::LogicalFrame;
use super::noise::NoiseGenerator;
use super::superop::SuperOp;
use crate::action::{Action, Axis};
use crate::error::{QffError, Result};
use crate::linalg::{cnot, embed, pauli, projector, qubit_bit, re, CMat, C64, ZERO};
use rand::RngExt;

/// Branches below this probability are never sampled.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-12;
/// Bias entries above this mark a measurement as destructive.
pub const BIAS_THRESHOLD: f64 = 1e-9;

/// One outcome of one action: a linear map including the trailing
/// dissipation. Its probability is the trace of the image of `rho0`.
#[derive(Clone, Debug)]
pub struct CPBranch {
    /// Measurement outcome index (0 = eigenvalue +1), `None` for unitaries.
    pub outcome: Option<usize>,
    pub label: &'static str,
    pub map: SuperOp,
}

impl CPBranch {
    pub fn probability(&self, frame: &LogicalFrame) -> f64 {
        match self.outcome {
            None => 1.0,
            Some(_) => self.map.image_trace(&frame.rho0).re,
        }
    }
}

fn check_action(action: &Action, n: usize) -> Result<()> {
    if let Some(q) = action.max_qubit() {
        if q >= n {
            return Err(QffError::InvalidAction(format!("{action} addresses qubit {q} of {n}")));
        }
    }
    if let Action::Cnot { control, target } = action {
        if control == target {
            return Err(QffError::InvalidAction(format!("{action} has identical endpoints")));
        }
    }
    Ok(())
}

/// Branch maps for `action` followed by dissipation for `dt`.
///
/// Readout errors flip the reported outcome with probability `msmt_error`;
/// the system is still projected, so branch `j` maps
/// `rho -> sum_k p(j|k) P_k rho P_k`.
pub fn step_maps(action: &Action, generator: &NoiseGenerator, dt: f64, msmt_error: f64) -> Result<Vec<CPBranch>> {
    let propagator = generator.propagator(dt);
    step_maps_with(action, generator.n_qubits, &propagator, msmt_error)
}

/// As [`step_maps`] with a precomputed dissipation propagator.
pub fn step_maps_with(action: &Action, n: usize, propagator: &SuperOp, msmt_error: f64) -> Result<Vec<CPBranch>> {
    check_action(action, n)?;
    if !(0.0..=0.5).contains(&msmt_error) {
        return Err(QffError::InvalidParameter(format!("measurement error {msmt_error} outside [0, 1/2]")));
    }
    let unitary = |u: CMat| {
        vec![CPBranch { outcome: None, label: "unitary", map: propagator.compose(&SuperOp::sandwich(&u, &u.adjoint())) }]
    };
    Ok(match *action {
        Action::Idle => vec![CPBranch { outcome: None, label: "unitary", map: propagator.clone() }],
        Action::Cnot { control, target } => unitary(cnot(control, target, n)),
        Action::Flip { qubit } => unitary(embed(&pauli(1), qubit, n)),
        Action::Measure { qubit, axis } => {
            let k = axis.pauli_index();
            let projs = [projector(k, 0, qubit, n), projector(k, 1, qubit, n)];
            (0..2)
                .map(|j| {
                    let mut kraus = SuperOp::sandwich(&projs[j], &projs[j]);
                    if msmt_error > 0.0 {
                        let right = SuperOp::sandwich(&projs[j], &projs[j]).to_dense() * re(1.0 - msmt_error);
                        let wrong = SuperOp::sandwich(&projs[1 - j], &projs[1 - j]).to_dense() * re(msmt_error);
                        kraus = SuperOp::from_dense(&(right + wrong), 1 << n);
                    }
                    CPBranch { outcome: Some(j), label: action.outcome_label(j), map: propagator.compose(&kraus) }
                })
                .collect()
        }
    })
}

pub fn branch_probabilities(branches: &[CPBranch], frame: &LogicalFrame) -> Vec<f64> {
    branches.iter().map(|b| b.probability(frame)).collect()
}

/// Draw an index from precomputed probabilities. One uniform variate is
/// consumed whenever there is more than one branch.
pub fn sample_index<R: rand::Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<(usize, f64)> {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(QffError::ProbabilityMismatch(total));
    }
    if probs.len() == 1 {
        return Ok((0, probs[0]));
    }
    let kept: f64 = probs.iter().filter(|&&p| p >= MIN_BRANCH_PROBABILITY).sum();
    let u: f64 = rng.random::<f64>() * kept;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p < MIN_BRANCH_PROBABILITY {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return Ok((i, p));
        }
    }
    Ok((last, probs[last]))
}

pub fn sample_branch<R: rand::Rng + ?Sized>(
    branches: &[CPBranch],
    frame: &LogicalFrame,
    rng: &mut R,
) -> Result<(usize, f64)> {
    sample_index(&branch_probabilities(branches, frame), rng)
}

/// `tr(sigma rho)` for a single-qubit Pauli on qubit `q`.
pub fn pauli_expectation(m: &CMat, q: usize, axis: Axis, n: usize) -> C64 {
    let bit = qubit_bit(q, n);
    let d = 1usize << n;
    let mut s = ZERO;
    for a in 0..d {
        let up = a & bit == 0;
        match axis {
            Axis::Z => s += if up { m[(a, a)] } else { -m[(a, a)] },
            // sigma[a, a^bit] entries; tr(sigma m) = sum_a sum_b sigma[a,b] m[b,a]
            Axis::X => s += m[(a ^ bit, a)],
            Axis::Y => {
                let sig = if up { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };
                s += sig * m[(a ^ bit, a)];
            }
        }
    }
    s
}

/// Bias vector `tr((P+ - P-) delta_j)` and whether the measurement reveals
/// logical information.
pub fn measurement_bias(frame: &LogicalFrame, action: &Action) -> Result<([f64; 3], bool)> {
    let Action::Measure { qubit, axis } = *action else {
        return Err(QffError::InvalidAction(format!("{action} is not a measurement")));
    };
    let n = frame.n_qubits;
    let b = [0, 1, 2].map(|j| pauli_expectation(&frame.delta[j], qubit, axis, n).re);
    let destructive = b.iter().any(|x| x.abs() > BIAS_THRESHOLD);
    Ok((b, destructive))
}
