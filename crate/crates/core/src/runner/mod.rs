//! Experiment configuration, the training loop, ablations and outputs.

mod ablation;
mod checkpoint;
mod config;
mod metrics;
mod status;
mod trainer;

pub use ablation::{format_table, mean_std, run_ablation, run_sweep, write_table_csv, AblationRow, SweepParam, Variant};
pub use checkpoint::Checkpoint;
pub use config::{ExperimentConfig, RewardSource, TeacherKind};
pub use metrics::{write_csv, MetricsRecord, MetricsSink, RecordKind};
pub use status::{Phase, RunStatus, StatusHandle};
pub use trainer::{evaluate, evaluate_policy, run, Event, RunSummary, SessionReport, Trainer};
