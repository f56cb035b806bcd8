use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use histrepair::agent::{RunRecord, Termination};
use histrepair::context::HeuristicKind;
use histrepair::eval::{evaluate, render_stats_report, render_repair_table, EvalBundle, OutcomeRow};
use histrepair::history::{availability_report, AvailabilityReport, BugCategory};
use histrepair::par::ExecMode;
use histrepair::testkit;
use serde::{Deserialize, Serialize};

use crate::config::{CampaignConfig, ProviderConfig};
use crate::pipeline::{self, write_file, write_json, Campaign, Layout, Prepared};
use crate::CliError;

/// Studies that exclude more than this share of the dataset fail.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.10;

#[derive(Debug)]
pub struct StudyOutcome {
    pub report: AvailabilityReport,
    pub dir: PathBuf,
}

/// Blame availability over the whole manifest. Files are written even when
/// too many bugs are excluded; the error comes afterwards.
pub fn cmd_study(c: &Campaign) -> Result<StudyOutcome, CliError> {
    let (items, load_failures) = c.manifest.study_items();
    let mut report = availability_report(&items, c.judge.as_ref(), ExecMode::Parallel);
    report.exclusions.extend(load_failures);
    report.exclusions.sort_by(|a, b| a.bug_id.cmp(&b.bug_id));
    let dir = c.layout.study();
    write_file(&dir.join("availability.txt"), &report.render_table())?;
    write_json(&dir.join("rows.json"), &report.rows)?;
    write_json(&dir.join("histogram.json"), &report.histogram())?;
    write_json(&dir.join("exclusions.json"), &report.exclusions)?;
    let frac = report.excluded_fraction();
    if frac > MAX_EXCLUDED_FRACTION {
        return Err(CliError::Domain(format!(
            "{} of {} bugs excluded ({:.1}%), above the {:.0}% limit; see {}",
            report.exclusions.len(),
            report.dataset_size(),
            100.0 * frac,
            100.0 * MAX_EXCLUDED_FRACTION,
            dir.join("exclusions.json").display()
        )));
    }
    Ok(StudyOutcome { report, dir })
}

pub fn cmd_context(c: &Campaign, bug_id: &str, kind: HeuristicKind) -> Result<(Prepared, PathBuf), CliError> {
    let entry = c.manifest.find(bug_id).map_err(CliError::domain)?;
    let prepared = pipeline::prepare(c, entry, kind)?;
    let dir = c.layout.context(bug_id, kind);
    pipeline::write_context(&dir, &prepared)?;
    Ok((prepared, dir))
}

#[derive(Debug)]
pub struct RepairOutcome {
    pub record: RunRecord,
    pub path: PathBuf,
}

impl RepairOutcome {
    /// 0 iff the tests pass at the end; guard stops map to 4, anything else
    /// to 3.
    pub fn exit_code(&self) -> i32 {
        if self.record.tests_passed_at_end {
            0
        } else if self.record.termination.is_guard() {
            4
        } else {
            3
        }
    }
}

pub fn cmd_repair(c: &Campaign, bug_id: &str, kind: HeuristicKind) -> Result<RepairOutcome, CliError> {
    let entry = c.manifest.find(bug_id).map_err(CliError::domain)?;
    c.freeze_config()?;
    let record = pipeline::repair(c, entry, kind)?;
    Ok(RepairOutcome { path: c.layout.record(bug_id, kind), record })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Job {
    pub bug_id: String,
    pub config: HeuristicKind,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct JobFailure {
    pub bug_id: String,
    pub config: Option<HeuristicKind>,
    pub error: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BatchSummary {
    /// Jobs run by this invocation, in completion order.
    pub ran: Vec<Job>,
    pub skipped: usize,
    pub failed: Vec<JobFailure>,
    pub terminations: BTreeMap<String, usize>,
}

fn record_complete(path: &Path) -> bool {
    path.is_file() && RunRecord::read_from(path).is_ok()
}

/// Every (bug, config) job in manifest order, skipping finished records.
pub fn cmd_batch(c: &Campaign, bugs: Option<&[String]>) -> Result<BatchSummary, CliError> {
    if let Some(ids) = bugs {
        for id in ids {
            c.manifest.find(id).map_err(CliError::domain)?;
        }
    }
    c.freeze_config()?;
    let entries: Vec<_> =
        c.manifest.entries.iter().filter(|e| bugs.is_none_or(|ids| ids.contains(&e.id))).collect();

    // A bug without a category could never be reported, so it is not run.
    let mut summary = BatchSummary::default();
    let mut categories: BTreeMap<String, BugCategory> = read_categories(&c.layout).unwrap_or_default();
    let mut runnable = Vec::with_capacity(entries.len());
    for e in entries {
        match c.manifest.category(e) {
            Ok(cat) => {
                categories.insert(e.id.clone(), cat);
                runnable.push(e);
            }
            Err(err) => summary.failed.push(JobFailure { bug_id: e.id.clone(), config: None, error: err.to_string() }),
        }
    }
    write_json(&c.layout.categories(), &categories)?;

    let mut jobs = Vec::new();
    for e in &runnable {
        for &kind in &c.cfg.configs {
            if record_complete(&c.layout.record(&e.id, kind)) {
                summary.skipped += 1;
            } else {
                jobs.push((*e, kind));
            }
        }
    }

    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::new());
    let workers = c.cfg.workers.min(jobs.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(entry, kind)) = jobs.get(i) else { break };
                tracing::info!(bug = %entry.id, config = %kind, "starting job");
                let out = pipeline::repair(c, entry, kind);
                match &out {
                    Ok(r) => tracing::info!(bug = %entry.id, config = %kind, termination = %r.termination, passed = r.tests_passed_at_end, "job finished"),
                    Err(e) => tracing::warn!(bug = %entry.id, config = %kind, error = %e, "job failed"),
                }
                results.lock().expect("results lock").push((entry.id.clone(), kind, out.map(|r| r.termination)));
            });
        }
    });
    for (bug_id, config, out) in results.into_inner().expect("results lock") {
        match out {
            Ok(t) => {
                *summary.terminations.entry(t.to_string()).or_default() += 1;
                summary.ran.push(Job { bug_id, config });
            }
            Err(e) => summary.failed.push(JobFailure { bug_id, config: Some(config), error: e.to_string() }),
        }
    }
    write_json(&c.layout.root.join("batch_summary.json"), &summary)?;
    Ok(summary)
}

fn read_categories(layout: &Layout) -> Option<BTreeMap<String, BugCategory>> {
    let text = std::fs::read_to_string(layout.categories()).ok()?;
    serde_json::from_str(&text).ok()
}

#[derive(Debug)]
pub struct ReportOutcome {
    pub bundle: EvalBundle,
    pub repair_table: String,
    pub stats: String,
    pub dir: PathBuf,
}

/// Load every record under `dir` (a campaign output directory or a bare
/// records directory with `categories.json` next to it).
pub fn load_rows(dir: &Path) -> Result<Vec<OutcomeRow>, CliError> {
    let records = if dir.join("records").is_dir() { dir.join("records") } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&records)
        .map_err(|e| CliError::Domain(format!("cannot read {}: {e}", records.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Ok(Vec::new());
    }
    let categories = [dir.join("categories.json"), records.join("categories.json")]
        .iter()
        .find_map(|p| std::fs::read_to_string(p).ok())
        .ok_or_else(|| CliError::Domain(format!("no categories.json under {}", dir.display())))?;
    let categories: BTreeMap<String, BugCategory> =
        serde_json::from_str(&categories).map_err(|e| CliError::Domain(format!("categories.json: {e}")))?;
    let mut rows = Vec::with_capacity(paths.len());
    for p in paths {
        let rec = RunRecord::read_from(&p).map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))?;
        let cat = categories
            .get(&rec.bug_id)
            .ok_or_else(|| CliError::Domain(format!("no category for bug `{}`", rec.bug_id)))?;
        rows.push(OutcomeRow::from_record(&rec, *cat));
    }
    Ok(rows)
}

pub fn cmd_report(dir: &Path) -> Result<ReportOutcome, CliError> {
    let rows = load_rows(dir)?;
    let bundle = evaluate(&rows, ExecMode::Parallel).map_err(CliError::domain)?;
    let repair_table = render_repair_table(&bundle.metrics);
    let stats = render_stats_report(&bundle.stats);
    let out = Layout::new(dir).report();
    write_file(&out.join("repair_table.txt"), &repair_table)?;
    write_file(&out.join("stats.txt"), &stats)?;
    write_json(&out.join("metrics.json"), &bundle.metrics)?;
    write_json(&out.join("overlaps.json"), &bundle.overlaps)?;
    write_json(&out.join("tradeoffs.json"), &bundle.tradeoffs)?;
    write_json(&out.join("strata.json"), &bundle.strata)?;
    write_json(&out.join("stats.json"), &bundle.stats)?;
    Ok(ReportOutcome { bundle, repair_table, stats, dir: out })
}

/// Campaign file used by the bundled demo.
pub const DEMO_CONFIG: &str = r#"manifest = "dataset/manifest.jsonl"
configs = ["non_history", "fn_all", "fn_pair", "fl_diff"]
adapter = "fixture"
workers = 4
output_dir = "runs"

[provider]
kind = "scripted"
script = "scripts/happy_path.json"

[guards]
max_steps = 50
max_cost = 1.0
max_wall_time = 600
per_command_timeout = 60

[sandbox]
backend = "local"

[pricing.scripted]
input_per_million = 3
output_per_million = 15
"#;

#[derive(Debug)]
pub struct DemoOutcome {
    pub config: PathBuf,
    pub batch: BatchSummary,
    pub report: ReportOutcome,
}

/// Build the toy dataset under `root`, repair it under all four
/// configurations with the scripted provider, and report. Re-running over
/// the same directory resumes.
pub fn cmd_demo(root: &Path) -> Result<DemoOutcome, CliError> {
    let config = root.join("campaign.toml");
    if !config.exists() {
        testkit::toy_dataset(&root.join("dataset")).map_err(CliError::domain)?;
        write_json(&root.join("scripts/happy_path.json"), &testkit::scripts::happy_path())?;
        write_file(&config, DEMO_CONFIG)?;
    }
    let cfg = CampaignConfig::load(&config, &Default::default())?;
    if !matches!(cfg.provider, ProviderConfig::Scripted { .. }) {
        return Err(CliError::Usage("the demo only runs with a scripted provider".into()));
    }
    let campaign = Campaign::open(cfg)?;
    let batch = cmd_batch(&campaign, None)?;
    if let Some(f) = batch.failed.first() {
        return Err(CliError::Domain(format!("demo job for {} failed: {}", f.bug_id, f.error)));
    }
    let report = cmd_report(&campaign.layout.root)?;
    Ok(DemoOutcome { config, batch, report })
}

/// Exit code for a finished batch: failures are domain errors.
pub fn batch_exit_code(summary: &BatchSummary) -> i32 {
    if summary.failed.is_empty() {
        0
    } else {
        3
    }
}

/// Reason shown on stderr when a repair stops without passing tests.
pub fn termination_message(record: &RunRecord) -> String {
    match (&record.termination, &record.termination_detail) {
        (Termination::CompletedSignal, _) => "completion signalled but tests fail at the end".into(),
        (t, Some(d)) => format!("{t}: {d}"),
        (t, None) => t.to_string(),
    }
}
