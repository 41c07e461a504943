//! Experiment harness behind the command-line tool. A runner turns a
//! configuration into a report.

pub mod config;
pub mod dataset;
pub mod report;
pub mod runners;

pub use config::{ConfigFile, Experiment, ExperimentConfig, LossChoice};
pub use dataset::{load_dataset, DataFormat, Dataset, Preprocessing};
pub use report::{emit_report, Cell, CellKind, ExperimentReport, OutputFormat};
pub use runners::run_experiment;
