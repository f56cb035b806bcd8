use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::parse::PARSER_IDS;
use super::SandboxError;

/// Names of the wrapper commands installed on the sandbox command path.
pub const COMPILE_WRAPPER: &str = "compile";
pub const TEST_WRAPPER: &str = "run-tests";

/// How to build and test one kind of project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectAdapter {
    pub adapter_id: String,
    /// Container image; unused by the local backend.
    #[serde(default)]
    pub image: String,
    pub compile_command: String,
    pub test_command: String,
    pub parser: String,
}

impl ProjectAdapter {
    /// The bundled toy C project: `build.sh` and `run_tests.sh` at the root.
    pub fn fixture() -> Self {
        Self {
            adapter_id: "fixture".into(),
            image: "gcc:13".into(),
            compile_command: "sh ./build.sh".into(),
            test_command: "sh ./run_tests.sh".into(),
            parser: "simple".into(),
        }
    }

    pub fn defects4j() -> Self {
        Self {
            adapter_id: "defects4j".into(),
            image: "defects4j:3.0.1".into(),
            compile_command: "defects4j compile".into(),
            test_command: "defects4j test -r".into(),
            parser: "defects4j".into(),
        }
    }

    pub fn validate(&self) -> Result<(), SandboxError> {
        if self.compile_command.trim().is_empty() || self.test_command.trim().is_empty() {
            return Err(SandboxError::Provision(format!("adapter `{}` has an empty command", self.adapter_id)));
        }
        if !PARSER_IDS.contains(&self.parser.as_str()) {
            return Err(SandboxError::Provision(format!(
                "adapter `{}` names unknown parser `{}`",
                self.adapter_id, self.parser
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterRegistry {
    adapters: BTreeMap<String, ProjectAdapter>,
}

impl Default for AdapterRegistry {
    fn default() -> Self {
        Self::new([ProjectAdapter::fixture(), ProjectAdapter::defects4j()])
    }
}

impl AdapterRegistry {
    pub fn new(adapters: impl IntoIterator<Item = ProjectAdapter>) -> Self {
        Self { adapters: adapters.into_iter().map(|a| (a.adapter_id.clone(), a)).collect() }
    }

    /// Add or replace an adapter.
    pub fn insert(&mut self, adapter: ProjectAdapter) {
        self.adapters.insert(adapter.adapter_id.clone(), adapter);
    }

    pub fn get(&self, adapter_id: &str) -> Result<&ProjectAdapter, SandboxError> {
        self.adapters
            .get(adapter_id)
            .ok_or_else(|| SandboxError::Provision(format!("unknown adapter `{adapter_id}`")))
    }
}
