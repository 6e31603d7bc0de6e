//! Evaluation: AUC, early stopping, training orchestration, sweeps.

pub mod auc;
pub mod early_stop;
pub mod train;

pub use auc::auc;
pub use early_stop::{EarlyStopState, IMPROVEMENT_TOL};
pub use train::{
    final_scores, mean_std, run_experiment, score_graph, sweep_view_count, train_model,
    train_once, EpochRecord, FailedSeed, Hyper, RunResult, SeedResult, SweepPoint,
};
