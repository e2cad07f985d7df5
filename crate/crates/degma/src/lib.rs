//! Experiment runner, file formats, SVG plots and the `degma` command line
//! on top of the `degma-core` numerics.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod plot;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{Error, Result};
pub use runner::{run, RunOptions, RunRecord};
