//! Experiment runner around the `twochoice` simulators: config resolution,
//! bundled table presets, deterministic parallel execution, report files,
//! and expectation checks.

pub mod checks;
pub mod config;
pub mod report;
pub mod runner;

use std::fmt;

/// Process-level failure categories, mapped to exit codes by `main`:
/// config 1, runtime 2, failed checks 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    ChecksFailed(usize),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::ChecksFailed(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
            CliError::ChecksFailed(count) => write!(f, "{count} expectation check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}
