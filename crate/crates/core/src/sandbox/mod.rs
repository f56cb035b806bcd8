//! Isolated per-bug execution environments.
//!
//! A sandbox owns a private clone of the repository checked out at the
//! buggy snapshot, plus two wrapper scripts on its command path: `compile`
//! and `run-tests`. The test wrapper leaves its output in a side directory
//! so the loop can tell whether an arbitrary command ran the tests.

mod adapter;
mod handle;
mod parse;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapter::{AdapterRegistry, ProjectAdapter, COMPILE_WRAPPER, TEST_WRAPPER};
pub use handle::{container_exec_argv, container_run_argv, tree_hash, SandboxHandle, ENV_ALLOWLIST};
pub use parse::{parse_test_output, PARSER_IDS};

use crate::git::GitError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandResult {
    pub stdout: String,
    pub stderr: String,
    /// Signal terminations map to 128 + signal number.
    pub exit_code: i32,
    pub duration_ms: u64,
    pub timed_out: bool,
}

impl CommandResult {
    pub fn success(&self) -> bool {
        self.exit_code == 0 && !self.timed_out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub all_passed: bool,
    pub failing_tests: Vec<String>,
    pub raw_excerpt: String,
}

impl TestOutcome {
    pub fn new(failing_tests: Vec<String>, raw_excerpt: String) -> Self {
        Self { all_passed: failing_tests.is_empty(), failing_tests, raw_excerpt }
    }
}

/// Result of one test invocation. Anything that could not be classified
/// counts as not passed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TestVerdict {
    Parsed(TestOutcome),
    Unparseable { reason: String, raw_excerpt: String },
}

impl TestVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, Self::Parsed(o) if o.all_passed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecOutput {
    pub result: CommandResult,
    /// Present iff the command invoked the test wrapper.
    pub test: Option<TestVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsolationBackend {
    #[default]
    Container,
    /// Temporary directory on the host; for tests and desk runs.
    Local,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxOptions {
    pub backend: IsolationBackend,
    #[serde(with = "secs")]
    pub per_command_timeout: Duration,
    /// Container runtime CLI, e.g. `docker` or `podman`.
    pub container_runtime: String,
}

impl Default for SandboxOptions {
    fn default() -> Self {
        Self {
            backend: IsolationBackend::Container,
            per_command_timeout: Duration::from_secs(300),
            container_runtime: "docker".into(),
        }
    }
}

impl IsolationBackend {
    /// Where the agent should be told the project lives. The local backend
    /// starts every command inside the worktree, so a relative path keeps
    /// prompts independent of the temporary directory.
    pub fn agent_repo_path(self) -> &'static str {
        match self {
            Self::Container => handle::CONTAINER_WORKTREE,
            Self::Local => ".",
        }
    }
}

impl SandboxOptions {
    pub fn local() -> Self {
        Self { backend: IsolationBackend::Local, ..Self::default() }
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// Files written by `teardown`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub patch: PathBuf,
    pub command_log: PathBuf,
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("provisioning failed: {0}")]
    Provision(String),
    #[error("sandbox is no longer alive")]
    SandboxDead,
    #[error("worktree is gone; no patch can be produced")]
    PatchUnavailable,
    #[error("could not persist artifacts to {path}: {source}")]
    Persist { path: PathBuf, source: std::io::Error },
    #[error("test output could not be parsed: {reason}")]
    Parse { reason: String, raw: String },
    #[error(transparent)]
    Git(#[from] GitError),
    #[error("sandbox i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// What the agent loop needs from an execution environment.
pub trait Sandbox: Send {
    fn exec(&mut self, step: u32, command: &str, timeout: Duration) -> Result<ExecOutput, SandboxError>;
    /// Run the adapter's test command directly, outside any agent action.
    fn run_test(&mut self, step: u32) -> Result<(CommandResult, TestVerdict), SandboxError>;
    fn final_patch(&self) -> Result<String, SandboxError>;
    fn is_alive(&self) -> bool;
    fn per_command_timeout(&self) -> Duration;
}
