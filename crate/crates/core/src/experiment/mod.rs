//! Experiment orchestration: configuration, scenario runs, load sweeps,
//! critic ablation and data collection, and machine-readable outputs.

mod config;
mod metrics;
mod outputs;
mod runner;

use thiserror::Error;

use crate::critic::CriticError;
use crate::model::ModelError;
use crate::workload::WorkloadError;

pub use config::{
    deep_merge, AgentBackend, AgentConfig, ClusterConfig, CollectConfig, CriticConfig, ExperimentConfig, PolicyConfig,
    PolicyKind, SweepConfig, BUILTIN_PRESETS,
};
pub use metrics::{compute_report, median, ClassStats, EpochMetrics, MetricsReport, ReportContext};
pub use outputs::{
    read_ablation_csv, read_epoch_samples, read_sweep_csv, write_ablation_csv, write_epoch_samples, write_run_outputs,
    write_sweep_csv,
};
pub use runner::{
    build_agent, build_scenario, collect_critic_data, epoch_samples, load_critic, run_ablation, run_experiment,
    run_load_sweep, run_policy, train_critic, AblationRow, CellFailure, EpochSample, NamedAgent, RunArtifacts, Scenario,
    SweepResult, SweepRow,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Critic(#[from] CriticError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
