//! Experiment orchestration: configs, seeded replicates, summaries,
//! gridsearch and CSV output.
//!
//! Every generator is derived from the master seed: replicate `r` uses the
//! streams `("env", r)`, `("agent", r)` and, for random MDPs, `("mdp", r)`
//! (see [`crate::rng::derive_seed`]). Replicates may run on the rayon pool;
//! results are merged by replicate index, so output never depends on
//! scheduling.

mod config;
mod emit;
mod grid;
mod run;
mod stats;

pub use config::{AgentConfig, AgentSpec, EnvSpec, ExperimentConfig, LearnerParams, PlannerParams};
pub use emit::{emit, emit_experiment, read_curve, read_runs, write_root_trace, EmittedFiles};
pub use grid::{
    apply_point, grid_points, gridsearch, gridsearch_with, GridEvaluation, GridPoint, GridResult,
    ParamGrid,
};
pub use run::{root_trace, run_agent, run_experiment, run_replicate, RunRecord, StepRow};
pub use stats::{mean_sd, query_frequency_curve, summarize, summarize_group, Summary};
