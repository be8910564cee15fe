//! Experiment harness for the reconciliation engine: configuration, frame
//! runners, the experiments behind each subcommand and their CSV output.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;

pub use config::ExperimentSpec;
pub use error::{BenchError, BenchResult};
