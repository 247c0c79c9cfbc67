//! Command-line front end for the `cqed` simulator: JSON configs, CSV/JSON
//! trajectories, SVG plots, backend comparison and parameter sweeps.

pub mod config;
pub mod output;
pub mod run;
pub mod svg;
pub mod sweep;

pub use config::{parse_config, ConfigError, Model, RunSpec};
pub use run::{run, run_compare, RunError, Summary};
