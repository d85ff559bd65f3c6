//! Library side of the CLI harness: run configuration, JSON/CSV
//! persistence, and the command implementations behind the `homeval`
//! binary.

pub mod commands;
pub mod config;
pub mod persist;

use thiserror::Error;

/// CLI process exit codes: 0 success, 2 config error, 3 input error,
/// 4 endpoint degraded to fallback (outputs still written).
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_DEGRADED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Input(_) => EXIT_INPUT,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
        }
    }

    /// Machine-readable error JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string() }
        })
        .to_string()
    }
}
