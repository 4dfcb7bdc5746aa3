//! File formats, parallel drivers and the `treedet` command line on top of
//! `treedet-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod examples;
pub mod formats;
pub mod output;
pub mod parallel;

pub use error::{CliError, Result};
