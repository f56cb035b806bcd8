//! One (bug, configuration) job: blame, context, prompts, sandboxed run.

use std::path::{Path, PathBuf};

use histrepair::agent::{self, accumulate_cost, LoopConfig, RunRecord, SystemClock};
use histrepair::context::{
    build_context, render_prompts, CFamilyDetector, HeuristicKind, HistoricalContext, PromptBundle, PromptVars,
    TemplateSet,
};
use histrepair::history::{summarize_blame, BlameSummary, BugCategory, BugSpec, CommitJudge, Snapshot};
use histrepair::manifest::{Manifest, ManifestEntry};
use histrepair::sandbox::{AdapterRegistry, SandboxHandle, COMPILE_WRAPPER, TEST_WRAPPER};

use crate::{CampaignConfig, CliError};

/// Output directory layout shared by every command.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

pub fn safe_id(bug_id: &str) -> String {
    bug_id.chars().map(|c| if c == '/' || c == '\\' { '_' } else { c }).collect()
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn records(&self) -> PathBuf {
        self.root.join("records")
    }

    pub fn record(&self, bug_id: &str, kind: HeuristicKind) -> PathBuf {
        agent::record_path(&self.records(), bug_id, kind)
    }

    pub fn artifacts(&self, bug_id: &str, kind: HeuristicKind) -> PathBuf {
        self.root.join("artifacts").join(format!("{}__{kind}", safe_id(bug_id)))
    }

    pub fn context(&self, bug_id: &str, kind: HeuristicKind) -> PathBuf {
        self.root.join("context").join(format!("{}__{kind}", safe_id(bug_id)))
    }

    pub fn study(&self) -> PathBuf {
        self.root.join("study")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn categories(&self) -> PathBuf {
        self.root.join("categories.json")
    }

    pub fn frozen_config(&self) -> PathBuf {
        self.root.join("config.frozen.toml")
    }
}

/// Everything loaded once per command invocation.
pub struct Campaign {
    pub cfg: CampaignConfig,
    pub manifest: Manifest,
    pub templates: TemplateSet,
    pub registry: AdapterRegistry,
    pub judge: Box<dyn CommitJudge>,
    pub layout: Layout,
}

impl Campaign {
    pub fn open(cfg: CampaignConfig) -> Result<Self, CliError> {
        let manifest = Manifest::load(&cfg.manifest).map_err(|e| match e {
            histrepair::manifest::ManifestError::Empty(_) => CliError::Usage(e.to_string()),
            other => CliError::domain(other),
        })?;
        Ok(Self {
            templates: cfg.templates()?,
            registry: cfg.registry(),
            judge: cfg.judge()?,
            layout: Layout::new(&cfg.output_dir),
            manifest,
            cfg,
        })
    }

    /// Write the effective configuration next to the outputs.
    pub fn freeze_config(&self) -> Result<(), CliError> {
        write_file(&self.layout.frozen_config(), &self.cfg.to_toml())
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Domain(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Domain(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_file(path, &(text + "\n"))
}

/// Context and prompts for one job, before any sandbox exists.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: BugSpec,
    pub category: BugCategory,
    pub summary: Option<BlameSummary>,
    pub context: Option<HistoricalContext>,
    pub bundle: PromptBundle,
}

pub fn prepare(c: &Campaign, entry: &ManifestEntry, kind: HeuristicKind) -> Result<Prepared, CliError> {
    let spec = c.manifest.bug_spec(entry).map_err(CliError::domain)?;
    let category = c.manifest.category(entry).map_err(CliError::domain)?;
    let (summary, context) = if kind == HeuristicKind::NonHistory {
        (None, None)
    } else {
        let repo = c.manifest.repo(entry);
        let snap = Snapshot::new(repo.clone(), spec.snapshot_ref.clone());
        let summary = summarize_blame(&snap, &spec, c.judge.as_ref()).map_err(CliError::domain)?;
        let context =
            build_context(&repo, &summary, kind, &CFamilyDetector, &c.cfg.budgets).map_err(CliError::domain)?;
        (Some(summary), context)
    };
    let vars = PromptVars::standard(
        c.cfg.sandbox.backend.agent_repo_path(),
        COMPILE_WRAPPER,
        TEST_WRAPPER,
        &c.cfg.sentinel,
    );
    let bundle = render_prompts(&spec, context.as_ref(), &c.templates, &vars).map_err(CliError::domain)?;
    Ok(Prepared { spec, category, summary, context, bundle })
}

/// Persist the context sidecars of a prepared job into `dir`.
pub fn write_context(dir: &Path, p: &Prepared) -> Result<(), CliError> {
    write_json(&dir.join("context.json"), &p.context)?;
    write_json(&dir.join("prompt.json"), &p.bundle)?;
    write_file(&dir.join("system.md"), &p.bundle.system_prompt)?;
    write_file(&dir.join("user.md"), &p.bundle.user_prompt)?;
    if let Some(s) = &p.summary {
        write_json(&dir.join("blame.json"), s)?;
    }
    Ok(())
}

/// Run one job to completion and persist its record last, so a record on
/// disk always means a finished job.
pub fn repair(c: &Campaign, entry: &ManifestEntry, kind: HeuristicKind) -> Result<RunRecord, CliError> {
    let mut provider = c.cfg.provider()?;
    let adapter = c
        .registry
        .get(entry.adapter.as_deref().unwrap_or(&c.cfg.adapter))
        .map_err(|e| CliError::Usage(e.to_string()))?
        .clone();
    let prepared = prepare(c, entry, kind)?;
    let artifacts = c.layout.artifacts(&entry.id, kind);
    write_context(&artifacts, &prepared)?;

    let repo = c.manifest.repo(entry);
    let mut sandbox = SandboxHandle::provision(&repo, &prepared.spec, &adapter, &c.cfg.sandbox).map_err(CliError::domain)?;
    let loop_cfg = LoopConfig {
        guards: c.cfg.guards,
        pricing: c.cfg.pricing.clone(),
        sentinel: c.cfg.sentinel.clone(),
        ..LoopConfig::default()
    };
    let clock = SystemClock::start();
    let mut record = agent::run(&prepared.spec, &prepared.bundle, &mut sandbox, provider.as_mut(), &loop_cfg, &clock);
    if let Some(usage) = prepared.summary.as_ref().and_then(|s| s.judge_usage) {
        let model = c.cfg.judge_model()?;
        let cost = accumulate_cost(&usage, &model, &c.cfg.pricing).map_err(CliError::domain)?;
        record.add_judge_cost(cost);
    }
    sandbox.teardown(&artifacts).map_err(CliError::domain)?;
    record
        .write_to(&c.layout.record(&entry.id, kind))
        .map_err(CliError::domain)?;
    Ok(record)
}
