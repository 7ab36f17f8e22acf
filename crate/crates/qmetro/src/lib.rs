//! Configuration files, result tables, run manifests and the command line
//! for the `qmetro-core` simulator.
//!
//! A run reads a TOML [`config::Config`], optimizes it with
//! [`qmetro_core::optimize::run_two_stage_with`] on a rayon [`executor::Pool`]
//! and leaves two artifacts: a checksummed JSON manifest per run and a CSV
//! row. Sweeps chain runs with warm starts along one axis.

pub mod commands;
pub mod config;
pub mod error;
pub mod executor;
pub mod grid;
pub mod manifest;
pub mod results;

pub use config::Config;
pub use error::{CliError, Result};
