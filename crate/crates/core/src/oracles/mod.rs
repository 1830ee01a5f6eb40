//! Reference strategies for collective dephasing: the closed-form two-qubit
//! protocol and exhaustive search over measurement decision trees.

pub mod analytic;
pub mod search;
pub mod tree;

pub use analytic::{analytic_optimum, analytic_two_qubit, TwoQubitAnalytic};
pub use search::{
    brute_force_search, default_idle_grid, evaluate_strategy, refine, sweep, sweep_csv, BranchOutcome, OracleModel,
    RankedStrategy, SearchOptions, SearchResult, StrategyEvaluation, SweepRow, MIN_PATH_PROBABILITY, RANKING_HEADER,
    SWEEP_HEADER,
};
pub use tree::{enumerate_strategies, fixed_first_count, strategy_count, Tree, MAX_DEPTH};
