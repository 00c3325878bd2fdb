//! Experiment configuration and runners.

pub mod checks;
mod config;
mod record;
mod run;

pub use config::{
    Arm, DataConfig, DistributionKind, ExperimentConfig, ExperimentKind, GridSetting,
    MetricConfig, ProbeConfig, SweepConfig, TemperatureMode, TrainSection, VerifyConfig,
    DEFAULT_GRID,
};
pub use record::{
    metric_rows, read_replicate_csv, replicate_file_name, summarize, summarize_rows,
    summary_from_dir, write_replicate_csv, write_summary_csv, ArmRecord, Check, MetricRow,
    RunRecord, SummaryRow, REPLICATE_HEADER, SUMMARY_HEADER,
};
pub use run::run_experiment;
