//! Batch front end: descriptor files in, SSF grids and verification reports out.

pub mod app;
pub mod descriptor;
pub mod output;

pub use app::{run, Cli, CliError};
