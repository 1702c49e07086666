//! Batch front end: resolves a [`RunConfig`] from flags and an optional TOML
//! file, dispatches to the core library and wraps the result in a
//! checksummed [`ReportEnvelope`].
//!
//! Exit codes: 0 for a clean run, 3 when the payload carries violation
//! evidence, 1 on errors.

pub mod config;
pub mod report;
pub mod run;

pub use config::{Command, FileConfig, Mode, RunConfig};
pub use report::ReportEnvelope;
pub use run::{run, write_outputs, Outcome, EXIT_CLEAN, EXIT_ERROR, EXIT_EVIDENCE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid value for `{key}`: {msg}")]
    Validation { key: String, msg: String },
    #[error("i/o: {0}")]
    Io(String),
    #[error("report: {0}")]
    Report(String),
    #[error("{0}")]
    Run(String),
}
