//! Configuration, experiment runners and file export.

pub mod commands;
pub mod config;
pub mod export;
pub mod run;

pub use commands::{cmd_calibrate, cmd_run, cmd_sweep, Overrides};
pub use config::{PlantKind, RunConfig, DEFAULT_CONFIG};
pub use run::{Experiment, MassBalance, RunResult, TraceRow};
