//! Scenario runner for the decohere toolkit: parses TOML scenario
//! configurations, dispatches to the model library and writes CSV time series
//! plus a JSON manifest of consistency checks.
//!
//! Output paths are taken relative to the working directory.

pub mod config;
pub mod output;
pub mod run;

pub use config::{emit, parse_config, ConfigError, Estimator, Params, Scenario, ScenarioConfig};
pub use output::{Check, RunManifest, Table};
pub use run::{execute, run_scenario, RunError, ScenarioOutput};

/// Environment variable overriding the worker thread count.
pub const WORKERS_ENV: &str = "DECOHERE_WORKERS";
