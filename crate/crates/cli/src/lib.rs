//! Reproducible experiment driver for `wetting-core`.
//!
//! A run reads an [`ExperimentConfig`], checks every precondition, computes
//! its tables and writes them as CSV files with JSON schema sidecars. The
//! [`RunManifest`] with the SHA-256 digest of every file is written last, so
//! its presence marks a completed run.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::run;
pub use config::{Command, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use output::{RunManifest, Table};
