//! Command-line driver for point cloud varifold curvature flows: run
//! configuration and presets, the run loop, and snapshot/metrics files.

pub mod config;
pub mod io;
pub mod presets;
pub mod run;

pub use config::{ConfigError, ConfigFile, RunConfig, RunLength};
pub use run::{run, run_with, MetricsRow, RunOutcome, Summary};
