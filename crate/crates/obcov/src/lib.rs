//! Experiment harness, file formats and command-line front end for one-bit
//! dithered covariance estimation.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod matrix_io;
pub mod sigma;
pub mod stats;
pub mod table;

pub use error::CliError;
