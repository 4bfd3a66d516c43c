//! Batch front end: load a JSON model config, build a measure change, check
//! it and verify it by Monte Carlo.
//!
//! Exit codes: 0 pass, 1 check or verification failed, 2 configuration or
//! I/O error, 3 the pair does not solve the MPRE (drift assertion).

pub mod commands;
pub mod config;
pub mod model;

use thiserror::Error;

pub use config::{LoadedConfig, RunConfig};
pub use model::PreparedModel;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Report text and the process exit code that goes with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub body: String,
}
