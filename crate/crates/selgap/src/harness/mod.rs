//! Experiment orchestration: config files, per-seed pipelines, the study
//! commands behind the CLI, and run reports.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod report;

pub use commands::{
    cmd_calibrate, cmd_calibration_study, cmd_curve, cmd_decompose, cmd_gen_data, cmd_loss_pred,
    cmd_report, cmd_shift_study, cmd_sweep_capacity, cmd_sweep_noise, cmd_train,
    eaurc_difference_bound,
};
pub use config::{ExperimentConfig, ModelConfig, ScoreConfig, TaskConfig};
pub use pipeline::{eval_pair, prepare_seed, split_indices, SeedData};
pub use report::{ReportRow, RunReport};
