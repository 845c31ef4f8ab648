//! Batch runner for the benchmark experiments: single runs, timing and
//! convergence sweeps, and reference solutions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod config;
pub mod error;
pub mod runner;

pub use config::RunConfig;
pub use error::CliError;
