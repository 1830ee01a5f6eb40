//! Quantum-feedback workbench: few-qubit memory simulation, recoverable
//! quantum information, natural policy-gradient training, recurrent-policy
//! distillation and brute-force strategy oracles.

pub mod action;
pub mod chz;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod oracles;
pub mod pauli;
pub mod qmem;
pub mod reward;
pub mod rl;
pub mod scenario;

pub use action::{Action, Axis};
pub use error::{QffError, Result};
pub use qmem::{LogicalFrame, NoiseGenerator, NoiseKind};
