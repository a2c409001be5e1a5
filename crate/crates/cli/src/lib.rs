//! Scenario runner for the semi-active suspension toolkit: scenario files,
//! controller synthesis with an on-disk cache, trajectory and summary CSVs,
//! plot data and the ranked comparison of summaries.

pub mod cache;
pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod svg;

pub use error::{CliError, Result};
