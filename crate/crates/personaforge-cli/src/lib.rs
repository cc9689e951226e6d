//! Pipeline CLI around `personaforge-core`: configuration, HTTP providers
//! with caching and rate limiting, dataset files, run manifests, and the six
//! subcommands (`questionnaire`, `generate`, `classify`, `evaluate`,
//! `linguistics`, `report`).

pub mod assets;
pub mod commands;
pub mod config;
pub mod fsio;
pub mod manifest;
pub mod providers;
pub mod runner;

/// Exit codes: 0 success, 1 partial failure with outputs preserved,
/// 2 configuration or usage error.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_error(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

pub fn run_error(message: impl Into<String>) -> CliError {
    CliError::Run(message.into())
}
