//! Command implementations behind the `histrepair` binary.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 domain error,
//! 4 the agent stopped on a guard (steps, cost or wall time).

pub mod commands;
pub mod config;
pub mod pipeline;

pub use commands::*;
pub use config::{CampaignConfig, JudgeConfig, Overrides, ProviderConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Guard(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Domain(_) => 3,
            Self::Guard(_) => 4,
        }
    }

    pub(crate) fn domain(e: impl std::fmt::Display) -> Self {
        Self::Domain(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Domain(m) => f.write_str(m),
            Self::Guard(m) => write!(f, "guard termination: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
