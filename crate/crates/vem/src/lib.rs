//! File formats, checkpoints, configs, reports and the `vem` command line on
//! top of [`vem_core`].

pub mod blob;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod ground_truth;
pub mod interchange;
pub mod report;
pub mod trainlog;

pub use error::{Error, Result};
