//! Training the shared policy and evaluating it against classical WENO.

mod adam;
mod eval;
mod gradient;
mod train;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use eval::{
    error_table, evaluate, evaluate_kh, field0_l2, metric_description, EvalCase, EvalReport, KhReport,
};
pub use gradient::{bptts_gradient, finite_difference, EpisodeGradient, GradientOptions};
pub use train::{
    preset, train, FileObserver, LogRow, RewardCurve, Silent, TrainConfig, TrainObserver, TrainOutcome,
    DIVERGENCE_WINDOW, PRESETS,
};
