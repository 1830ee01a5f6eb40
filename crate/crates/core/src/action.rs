use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Index into Pauli tables (1 = X, 2 = Y, 3 = Z).
    pub fn pauli_index(self) -> usize {
        match self {
            Axis::X => 1,
            Axis::Y => 2,
            Axis::Z => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// One hardware instruction, executed at the start of a time slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Cnot { control: usize, target: usize },
    Measure { qubit: usize, axis: Axis },
    Flip { qubit: usize },
    Idle,
}

impl Action {
    pub fn is_measurement(&self) -> bool {
        matches!(self, Action::Measure { .. })
    }

    /// Label of outcome `m` (0 is the +1 eigenvalue).
    pub fn outcome_label(&self, m: usize) -> &'static str {
        match self {
            Action::Measure { axis: Axis::Z, .. } => ["0", "1"][m],
            Action::Measure { .. } => ["+", "-"][m],
            _ => "unitary",
        }
    }

    pub fn max_qubit(&self) -> Option<usize> {
        match *self {
            Action::Cnot { control, target } => Some(control.max(target)),
            Action::Measure { qubit, .. } | Action::Flip { qubit } => Some(qubit),
            Action::Idle => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Cnot { control, target } => write!(f, "CNOT({control},{target})"),
            Action::Measure { qubit, axis } => write!(f, "M{}({qubit})", axis.name().to_uppercase()),
            Action::Flip { qubit } => write!(f, "X({qubit})"),
            Action::Idle => write!(f, "idle"),
        }
    }
}
