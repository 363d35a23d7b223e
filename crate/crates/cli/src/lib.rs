//! Command-line front end: ingestion, configuration, model files, exports
//! and plots around the `tsidec` pipeline.

pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod ingest;
pub mod model_io;
pub mod plot;
pub mod stats;

pub use error::{CliError, Result};
