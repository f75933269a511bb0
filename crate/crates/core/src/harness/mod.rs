//! The annotation loop end to end: sessions, collections, experiment
//! matrices and their persisted results.

mod config;
mod curves;
mod experiment;
mod output;
mod session;

pub use config::{ExperimentConfig, ModelPaths, RunMode, TrainingConfig};
pub use curves::{avg_jf_up_to, hours_to_threshold, time_to_threshold};
pub use experiment::{prepare_models, replicate_config, run_experiment, train_at_for, train_policy_for, train_qnet_for, MethodCurve};
pub use output::{
    csv_rows, format_report, parse_mask_track, read_csv, sig6, summarize, write_csv, write_mask_track, CsvRow, ReportRow, CSV_HEADER,
    MASK_MAGIC,
};
pub use session::{run_collection, run_session, schedule_step, LogEntry, LoopConfig, Method, Models, Schedule, SessionState};
