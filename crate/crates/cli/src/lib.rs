//! Configuration, experiment orchestration and artifact export for the
//! `ecap` command-line tool.

pub mod commands;
pub mod config;
pub mod export;

pub use commands::{cmd_inspect_bank, cmd_run, cmd_sweep, CommandError, RunOutcome, SweepGrid, SweepReport};
pub use config::{ConfigError, RunConfig};
