//! Monte-Carlo experiment harness: configuration, ensemble runner, output
//! files and the command-line interface.

pub mod calibrate;
pub mod cli;
pub mod config;
pub mod emit;
pub mod experiment;

pub use config::{AlgorithmKind, AlgorithmSpec, ExperimentConfig, OutputFormat};
pub use experiment::{run_experiment, run_experiment_with_workers, ExperimentOutput, LearningCurve};
