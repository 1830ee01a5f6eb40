//! Two-stage learning: natural policy-gradient training of the state-aware
//! network and supervised distillation into a recurrent student.

pub mod config;
pub mod distill;
pub mod evaluate;
pub mod gradient;
pub mod policy;
pub mod rollout;
pub mod train;

pub use config::{AdamConfig, CgConfig, DistillConfig, EarlyStop, TrainConfig};
pub use distill::{
    distill_recurrent, student_input, student_input_len, teacher_rows, validate, DistillResult, DistillRow, ValidationReport,
};
pub use evaluate::{evaluate_policy, export_activations, ActionCount, ActivationRow, EvaluationReport, LoadedPolicy};
pub use gradient::{
    conjugate_gradient, entropy_gradient, fisher_vector_product, natural_gradient, policy_gradient, weighted_score, CgResult,
};
pub use policy::{BatchPolicy, ScriptedPolicy, Teacher};
pub use rollout::{rollout_batch, RolloutOptions, Rollouts};
pub use train::{curve_csv, train_state_aware, CurveRow, TrainOptions, TrainResult, CURVE_HEADER};
