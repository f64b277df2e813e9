//! Std companion to `roal-core`: the checkpoint and dataset container,
//! Omniglot ingestion, run configuration files, CSV reports and a parallel
//! training driver. The `roal` binary wraps these in a command line.

pub mod checkpoint;
pub mod config;
pub mod container;
pub mod dataset;
pub mod driver;
mod error;
pub mod report;

pub use error::{Error, FormatError, Result};
pub use roal_core;
