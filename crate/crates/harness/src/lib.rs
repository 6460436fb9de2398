//! Experiment driver for the minimax solvers: TOML configs, seeded
//! replicate runs, CSV trajectories, summaries and solver comparisons.

pub mod build;
pub mod compare;
pub mod config;
pub mod error;
pub mod runner;

pub use build::Setup;
pub use compare::{compare_solvers, format_table, ComparisonRow};
pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use runner::{run_all, run_experiment, simulate, RunResult};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "MINIMAX_OUT_DIR";
