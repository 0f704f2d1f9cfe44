//! Reproducible experiment runner: configuration files, ensemble
//! orchestration and artifact output.

mod config;
mod output;
mod runner;

pub use config::{parse_config, schema, ExperimentConfig, ExperimentKind, Value};
pub use output::{output_dir, OUTPUT_ENV};
pub use runner::{run, RedFlag, RunOutcome};
