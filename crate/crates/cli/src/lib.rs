//! File formats, configuration and commands for the `countimpute` binary.
//!
//! Subcommands:
//!
//! - `simulate`: Monte-Carlo comparison of imputation methods.
//! - `analyze`: full-data fit plus per-level interval lengths and
//!   goodness-of-fit p-values on a `y,x` dataset.
//! - `impute`: writes `m` completed copies of a dataset.
//! - `gof`: chi-square comparison of two covariate columns.

pub mod analyze;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gof;
pub mod output;
pub mod parallel;

pub use commands::execute;
pub use config::{Command, ConfigMap, RunConfig};
pub use error::CliError;
