//! Exact density-matrix simulation of the memory: noise generators, per-action
//! branch maps and evolution of the four-component logical frame.

pub mod branch;
pub mod frame;
pub mod noise;
pub mod superop;

pub use branch::{
    branch_probabilities, measurement_bias, pauli_expectation, sample_branch, sample_index, step_maps,
    step_maps_with, CPBranch, BIAS_THRESHOLD, MIN_BRANCH_PROBABILITY,
};
pub use frame::{cube_directions, evolve_frame, LogicalFrame};
pub use noise::{build_generator, NoiseGenerator, NoiseKind};
pub use superop::SuperOp;
