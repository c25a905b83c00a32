//! File formats, reports and the `ahfe` command line on top of `ahfe-core`.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod model_io;
pub mod report;

pub use error::{CliError, Result};
