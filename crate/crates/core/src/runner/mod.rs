//! Configuration and orchestration of the command-line experiments.

mod config;
mod experiment;

pub use config::{
    parse_entries, parse_override, parse_real, parse_vector, Experiment, ExperimentConfig, KEYS, PRESETS,
};
pub use experiment::{execute, run_experiment, ExitStatus, ExperimentOutcome};
