//! Scenarios: configuration, simulation, scoring and the Monte Carlo harness.

pub mod config;
pub mod experiment;
pub mod ospa;
pub mod sim;

pub use config::{apply_override, Controller, ScenarioConfig, TargetSpec};
pub use experiment::{run_experiment, run_experiment_with_progress, write_outputs, Experiment, Replicate};
pub use ospa::{ospa, OspaResult};
pub use sim::{simulate_measurements, simulate_truth, Truth};
