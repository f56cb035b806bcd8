//! Campaign configuration: one TOML file, secrets from the environment,
//! flags on top.

use std::path::{Path, PathBuf};
use std::time::Duration;

use histrepair::agent::{ChatProvider, GuardConfig, OpenAiCompatProvider, PricingTable, ScriptedProvider, DEFAULT_SENTINEL};
use histrepair::context::{Budgets, HeuristicKind, TemplateSet};
use histrepair::history::{CommitJudge, FirstCandidateJudge, LlmJudge};
use histrepair::sandbox::{AdapterRegistry, ProjectAdapter, SandboxOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    /// Replays a transcript fixture; no network.
    Scripted { script: PathBuf },
    /// Any OpenAI-compatible `/chat/completions` endpoint.
    OpenaiCompat {
        model: String,
        endpoint: String,
        /// Environment variable holding the API key.
        #[serde(default = "default_key_env")]
        api_key_env: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_key_env() -> String {
    "HISTREPAIR_API_KEY".into()
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JudgeConfig {
    /// Deterministic: the candidate with the smallest hash.
    #[default]
    FirstCandidate,
    /// Ask the configured provider; a scripted provider needs its own
    /// transcript.
    Llm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        script: Option<PathBuf>,
    },
}

fn all_configs() -> Vec<HeuristicKind> {
    HeuristicKind::ALL.to_vec()
}

fn default_adapter() -> String {
    "fixture".into()
}

fn default_workers() -> usize {
    1
}

fn default_output() -> PathBuf {
    "runs".into()
}

fn default_sentinel() -> String {
    DEFAULT_SENTINEL.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub manifest: PathBuf,
    #[serde(default = "all_configs")]
    pub configs: Vec<HeuristicKind>,
    #[serde(default = "default_adapter")]
    pub adapter: String,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
    #[serde(default = "default_sentinel")]
    pub sentinel: String,
    pub provider: ProviderConfig,
    #[serde(default)]
    pub judge: JudgeConfig,
    #[serde(default)]
    pub guards: GuardConfig,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub sandbox: SandboxOptions,
    #[serde(default)]
    pub pricing: PricingTable,
    /// Extra project adapters, alongside the bundled ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adapters: Vec<ProjectAdapter>,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub configs: Option<Vec<HeuristicKind>>,
    pub manifest: Option<PathBuf>,
}

fn absolutize(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl CampaignConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
    }

    /// Load, resolve relative paths against the file's directory, apply
    /// overrides and validate.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
        cfg.resolve_paths(&base);
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        absolutize(base, &mut self.manifest);
        absolutize(base, &mut self.output_dir);
        if let Some(t) = &mut self.template_dir {
            absolutize(base, t);
        }
        if let ProviderConfig::Scripted { script } = &mut self.provider {
            absolutize(base, script);
        }
        if let JudgeConfig::Llm { script: Some(s) } = &mut self.judge {
            absolutize(base, s);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(out) = &o.output_dir {
            self.output_dir = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
        if let Some(c) = &o.configs {
            self.configs = c.clone();
        }
        if let Some(m) = &o.manifest {
            self.manifest = std::path::absolute(m).unwrap_or_else(|_| m.clone());
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.configs.is_empty() {
            return usage("at least one configuration must be selected".into());
        }
        let mut seen = self.configs.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.configs.len() {
            return usage("configurations are listed more than once".into());
        }
        if self.workers == 0 {
            return usage("workers must be at least 1".into());
        }
        self.guards.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.pricing.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.sentinel.trim().is_empty() {
            return usage("sentinel must not be empty".into());
        }
        if let ProviderConfig::OpenaiCompat { model, .. } = &self.provider {
            if self.pricing.get(model).is_err() {
                return usage(format!("no pricing for live model `{model}`"));
            }
        }
        for a in &self.adapters {
            a.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        self.registry().get(&self.adapter).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn registry(&self) -> AdapterRegistry {
        let mut r = AdapterRegistry::default();
        for a in &self.adapters {
            r.insert(a.clone());
        }
        r
    }

    pub fn templates(&self) -> Result<TemplateSet, CliError> {
        match &self.template_dir {
            None => Ok(TemplateSet::default()),
            Some(dir) => TemplateSet::from_dir(dir)
                .map_err(|e| CliError::Usage(format!("cannot load templates from {}: {e}", dir.display()))),
        }
    }

    /// A fresh provider; fails before anything is provisioned when
    /// credentials are missing.
    pub fn provider(&self) -> Result<Box<dyn ChatProvider + Send>, CliError> {
        match &self.provider {
            ProviderConfig::Scripted { script } => Ok(Box::new(
                ScriptedProvider::from_file(script).map_err(|e| CliError::Usage(e.to_string()))?,
            )),
            ProviderConfig::OpenaiCompat { model, endpoint, api_key_env, timeout_secs } => Ok(Box::new(
                OpenAiCompatProvider::from_env(endpoint, model, api_key_env, Duration::from_secs(*timeout_secs))
                    .map_err(|e| CliError::Usage(e.to_string()))?,
            )),
        }
    }

    pub fn judge(&self) -> Result<Box<dyn CommitJudge>, CliError> {
        match (&self.judge, &self.provider) {
            (JudgeConfig::FirstCandidate, _) => Ok(Box::new(FirstCandidateJudge)),
            (JudgeConfig::Llm { script: Some(s) }, _) => Ok(Box::new(LlmJudge::new(Box::new(
                ScriptedProvider::from_file(s).map_err(|e| CliError::Usage(e.to_string()))?,
            )))),
            (JudgeConfig::Llm { script: None }, ProviderConfig::OpenaiCompat { .. }) => {
                Ok(Box::new(LlmJudge::new(self.provider()?)))
            }
            (JudgeConfig::Llm { script: None }, ProviderConfig::Scripted { .. }) => {
                Err(CliError::Usage("an LLM judge with a scripted provider needs `judge.script`".into()))
            }
        }
    }

    /// Model id the judge is billed under.
    pub fn judge_model(&self) -> Result<String, CliError> {
        Ok(match (&self.judge, &self.provider) {
            (JudgeConfig::Llm { script: Some(s) }, _) => ScriptedProvider::from_file(s)
                .map_err(|e| CliError::Usage(e.to_string()))?
                .model_id()
                .to_string(),
            (_, ProviderConfig::OpenaiCompat { model, .. }) => model.clone(),
            (_, ProviderConfig::Scripted { script }) => ScriptedProvider::from_file(script)
                .map_err(|e| CliError::Usage(e.to_string()))?
                .model_id()
                .to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
manifest = "data/manifest.jsonl"
[provider]
kind = "scripted"
script = "script.json"
"#;

    #[test]
    fn defaults_fill_in() {
        let mut c = CampaignConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.configs, HeuristicKind::ALL);
        assert_eq!(c.guards.max_steps, 50);
        assert_eq!(c.budgets, Budgets::default());
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.manifest, Path::new("/cfg/data/manifest.jsonl"));
        assert_eq!(c.provider, ProviderConfig::Scripted { script: "/cfg/script.json".into() });
    }

    #[test]
    fn decimals_and_durations_parse() {
        let text = format!(
            "{MINIMAL}\n[guards]\nmax_cost = 0.5\nmax_wall_time = 90\n[pricing.scripted]\ninput_per_million = 3\noutput_per_million = \"15.5\"\n"
        );
        let c = CampaignConfig::parse(&text).unwrap();
        assert_eq!(c.guards.max_cost, "0.5".parse().unwrap());
        assert_eq!(c.guards.max_wall_time, Duration::from_secs(90));
        assert_eq!(c.pricing.get("scripted").unwrap().output_per_million, "15.5".parse().unwrap());
        let again = CampaignConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn validation_rejects_bad_campaigns() {
        let mut c = CampaignConfig::parse(MINIMAL).unwrap();
        c.configs.clear();
        assert!(matches!(c.validate(), Err(CliError::Usage(_))));
        let text = MINIMAL.replace("kind = \"scripted\"\nscript = \"script.json\"", "kind = \"openai_compat\"\nmodel = \"m\"\nendpoint = \"http://x\"");
        let c = CampaignConfig::parse(&text).unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("no pricing"));
        assert!(CampaignConfig::parse("manifest = 1").is_err());
        assert!(CampaignConfig::parse(&format!("{MINIMAL}\nbogus = 1\n")).is_err());
    }
}
