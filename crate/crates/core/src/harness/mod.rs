//! Seeded Monte-Carlo experiments: scenario sampling, detection noise,
//! error metrics and per-noise-level summaries.

pub mod config;
pub mod metrics;
pub mod run;
pub mod scenario;

pub use config::{ExperimentConfig, DEFAULT_SEED};
pub use metrics::{
    align_fanbeam_truth, angle_difference, compute_errors_fanbeam, compute_errors_parallel, ErrorSummary,
    FanBeamErrors, ParallelErrors, ParallelEstimate,
};
pub use run::{run_experiment, run_realization, stream_rng, ExperimentResult, LevelResult, RealizationLog};
pub use scenario::{add_detection_noise, sample_scenario, Scenario};
