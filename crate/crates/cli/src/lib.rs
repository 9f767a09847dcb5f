//! Experiment driver behind the `ampkit` binary: configs, runners and
//! output files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cs;
pub mod error;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, Scale};
pub use error::CliError;
