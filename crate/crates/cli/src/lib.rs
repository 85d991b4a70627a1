//! IO companion to `urbanseg-core`: the binary container and extended-PLY
//! file formats, feature files, pipeline configuration, the parallel scene
//! driver, and report rendering. File layouts are specified in FORMAT.md.

pub mod commands;
pub mod config;
pub mod container;
pub mod driver;
pub mod error;
pub mod ply;
pub mod provider;
pub mod report;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{CliError, FormatError};
