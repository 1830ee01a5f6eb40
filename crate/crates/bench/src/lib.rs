//! Fixtures shared by the benchmarks.

use qff_core::reward::RewardConfig;
use qff_core::scenario::{preset, BackendChoice, EpisodeState, Environment};

/// The four-qubit all-to-all bit-flip memory on the requested backend.
pub fn bit_flip_env(backend: BackendChoice) -> Environment {
    let mut cfg = preset("all-to-all").expect("built-in scenario");
    cfg.backend = backend;
    Environment::from_config(&cfg, RewardConfig::default()).expect("valid scenario")
}

/// An episode advanced by `steps` cycles through the action set, so the frame
/// carries correlations instead of the trivial initial state.
pub fn warm_state(env: &Environment, steps: usize, seed: u64) -> EpisodeState {
    let mut s = env.reset(seed);
    for t in 0..steps {
        env.apply(&mut s, t % env.n_actions()).expect("step succeeds");
    }
    s
}
