//! Experiment driver: configs, replicated runs, tuning and result output.

pub mod config;
pub mod experiment;
pub mod grid;
pub mod report;

pub use config::{DataSource, ExperimentConfig, GridSpec, Method};
pub use experiment::{run_experiment, ResultRecord};
pub use grid::{grid_search, grid_search_on, GridOutcome};
pub use report::{emit_results, read_records, render, OutputFormat};
