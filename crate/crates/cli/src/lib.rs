//! Command-line pipeline over the `chaosforge` library: profile, cluster,
//! balance and curate series corpora; simulate, forecast and evaluate.
//!
//! Every artifact carries `{tool_version, seed, config_hash}` and is
//! written atomically. Batch work runs on a fixed-size worker pool and is
//! collected in manifest order, so the worker count never changes output.

pub mod artifact;
pub mod cli;
pub mod config;
pub mod error;
pub mod forecasting;
pub mod manifest;
pub mod profile;
pub mod regimes;

pub use cli::{run, Cli};
pub use error::{CliError, CliResult};
