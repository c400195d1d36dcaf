//! Command-line front end for the Richards solver: scenario files, builtin
//! test setups, diagnostics CSV, profiles, VTK snapshots and the mesh sweep.

pub mod builtins;
pub mod config;
pub mod output;
pub mod run;
pub mod scenario;

pub use config::{ConfigError, ScenarioConfig};
pub use run::{run_scenario, run_sweep, simulate, Outcome, RunError, RunOptions, SweepRow};
pub use scenario::Scenario;
