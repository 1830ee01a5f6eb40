//! Scenario definitions and the episodic environment built from them.

pub mod config;
pub mod env;

pub use config::{
    build_action_set, ActionSet, BackendChoice, Connectivity, HardwareSpec, Measurements, NoiseSpec, ScenarioConfig,
    SCHEMA_VERSION,
};
pub use env::{
    pca_block, trajectory_jsonl, EpisodeState, Environment, Frame, Observation, StepOutcome, Successor, TrajectoryRow,
};

use crate::qmem::NoiseKind;

fn bit_flip(name: &str, connectivity: Connectivity, z: Vec<usize>, flips: Vec<usize>) -> ScenarioConfig {
    ScenarioConfig {
        version: SCHEMA_VERSION,
        name: name.into(),
        qubits: 4,
        connectivity,
        measurements: Measurements { z, xy: Vec::new() },
        flips,
        noise: NoiseSpec { kind: NoiseKind::BitFlip, t_dec: Some(1200.0), moments: Vec::new() },
        msmt_error: 0.0,
        horizon: 200,
        dt: 1.0,
        pca_components: 6,
        decode_window: 0,
        target_qubit: 0,
        backend: BackendChoice::Auto,
    }
}

/// Collective dephasing with one data qubit and `ratios.len() - 1` ancillas,
/// scaled so that the trivial decay time equals `t_triv`.
pub fn correlated(name: &str, ratios: &[f64], t_triv: f64, k: usize) -> ScenarioConfig {
    let n = ratios.len();
    let s: f64 = ratios.iter().map(|m| m * m).sum();
    ScenarioConfig {
        version: SCHEMA_VERSION,
        name: name.into(),
        qubits: n,
        connectivity: Connectivity::Named("none".into()),
        measurements: Measurements { z: Vec::new(), xy: (1..n).collect() },
        flips: Vec::new(),
        noise: NoiseSpec {
            kind: NoiseKind::CorrelatedDephasing,
            t_dec: Some(t_triv * ratios[0] * ratios[0] / s),
            moments: ratios.to_vec(),
        },
        msmt_error: 0.0,
        horizon: 200,
        dt: 1.0,
        pca_components: k,
        decode_window: 0,
        target_qubit: 0,
        backend: BackendChoice::Auto,
    }
}

/// The shipped scenario pack, keyed by name.
pub fn presets() -> Vec<ScenarioConfig> {
    let all: Vec<usize> = (0..4).collect();
    let named = |s: &str| Connectivity::Named(s.into());
    let mut out = vec![
        bit_flip("all-to-all", named("all-to-all"), all.clone(), all.clone()),
        ScenarioConfig { name: "all-to-all-recovery".into(), decode_window: 10, ..bit_flip("", named("all-to-all"), all.clone(), all.clone()) },
        bit_flip("chain-all-msmt", named("chain"), all.clone(), all.clone()),
        bit_flip("chain-one-msmt", named("chain"), vec![2], all.clone()),
        bit_flip(
            "triangle",
            Connectivity::Pairs(vec![[0, 1], [1, 0], [0, 2], [2, 0], [1, 2], [2, 1], [2, 3], [3, 2]]),
            vec![3],
            all.clone(),
        ),
        ScenarioConfig { name: "all-to-all-msmt-noise-small".into(), msmt_error: 0.01, ..bit_flip("", named("all-to-all"), all.clone(), all.clone()) },
        ScenarioConfig { name: "all-to-all-msmt-noise-large".into(), msmt_error: 0.1, ..bit_flip("", named("all-to-all"), all.clone(), all.clone()) },
        ScenarioConfig { name: "all-to-all-short".into(), horizon: 50, ..bit_flip("", named("all-to-all"), all.clone(), all.clone()) },
    ];
    out.push(correlated("correlated-2", &[1.0, 4.0], 500.0, 3));
    out.push(correlated("correlated-3", &[1.0, 3.7, 4.0], 500.0, 4));
    out.push(correlated("correlated-4", &[1.0, 3.7, 4.0, 4.2], 500.0, 6));
    out
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    presets().into_iter().find(|c| c.name == name)
}
