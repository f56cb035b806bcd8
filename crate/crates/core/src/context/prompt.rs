use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::template::{render_template, TemplateError};
use super::truncate::TRUNCATION_NOTICE;
use super::{HeuristicKind, HistoricalContext, HistoryPayload};
use crate::history::{BugSpec, EditKind};

const DEFAULT_SYSTEM: &str = include_str!("../../templates/system.md");
const DEFAULT_USER: &str = include_str!("../../templates/user.md");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub system: String,
    pub user: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self { system: DEFAULT_SYSTEM.to_string(), user: DEFAULT_USER.to_string() }
    }
}

impl TemplateSet {
    /// Load `system.md` and `user.md` from a template directory.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        Ok(Self {
            system: std::fs::read_to_string(dir.join("system.md"))?,
            user: std::fs::read_to_string(dir.join("user.md"))?,
        })
    }
}

/// Run-level template bindings. Bug-derived fields are bound by
/// `render_prompts` itself.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptVars(BTreeMap<String, String>);

impl PromptVars {
    pub fn standard(repo_path: &str, compile_command: &str, test_command: &str, sentinel: &str) -> Self {
        let mut v = Self::default();
        v.set("repo_path", repo_path);
        v.set("compile_command", compile_command);
        v.set("test_command", test_command);
        v.set("sentinel", sentinel);
        v
    }

    pub fn set(&mut self, key: &str, value: &str) -> &mut Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn unset(&mut self, key: &str) -> &mut Self {
        self.0.remove(key);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_prompt: String,
    pub user_prompt: String,
    /// Rough token count: characters / 4, rounded up.
    pub token_estimate: usize,
    pub config: HeuristicKind,
}

fn render_failing_tests(spec: &BugSpec) -> String {
    if spec.failing_tests.is_empty() {
        return "(none listed)".into();
    }
    spec.failing_tests.iter().map(|t| format!("- {t}")).collect::<Vec<_>>().join("\n")
}

fn render_locations(spec: &BugSpec) -> String {
    let mut out = String::new();
    for loc in &spec.locations {
        let _ = write!(out, "- {}:", loc.file_path);
        let parts: Vec<String> = loc
            .lines
            .iter()
            .map(|l| match l.kind {
                EditKind::Modified => format!(" line {} (modify)", l.line),
                EditKind::Deleted => format!(" line {} (delete)", l.line),
                EditKind::InsertionPoint => format!(" before line {} (insert)", l.line),
            })
            .collect();
        out.push_str(&parts.join(","));
        out.push('\n');
    }
    out.pop();
    out
}

/// The historical context section embedded into the user prompt.
pub fn render_history(ctx: &HistoricalContext) -> String {
    let mut out = String::from("# Historical Context\n");
    let _ = writeln!(out, "Blame commit: {}", ctx.commit_id);
    let _ = writeln!(out, "Commit message:\n{}", ctx.commit_message.trim_end());
    if let Some(notice) = &ctx.notice {
        let _ = writeln!(out, "\nNote: {notice}");
    }
    match &ctx.payload {
        HistoryPayload::FnAll { files } => {
            out.push_str("\n## Functions in files changed by the blame commit\n");
            for f in files {
                let names = if f.names.is_empty() { "(none)".to_string() } else { f.names.join(", ") };
                let _ = writeln!(out, "- {}: {names}", f.path);
                if let Some(w) = &f.warning {
                    let _ = writeln!(out, "  warning: {w}");
                }
            }
        }
        HistoryPayload::FnPair { before, after } => {
            let any = before.is_some() || after.is_some();
            for (label, span) in [("before", before), ("after", after)] {
                let Some(span) = span else {
                    if any {
                        let _ = writeln!(out, "\n## Function {label} the blame commit\n(absent)");
                    }
                    continue;
                };
                let _ = writeln!(
                    out,
                    "\n## Function {label} the blame commit: {} ({}:{}-{})\n```",
                    span.name, span.file_path, span.start_line, span.end_line
                );
                out.push_str(&span.body_text);
                if !span.body_text.ends_with('\n') {
                    out.push('\n');
                }
                out.push_str("```\n");
            }
        }
        HistoryPayload::FlDiff { diff } => {
            out.push_str("\n## Diff of the blame commit\n```diff\n");
            out.push_str(diff);
            if !diff.ends_with('\n') {
                out.push('\n');
            }
            out.push_str("```\n");
        }
    }
    if ctx.truncated {
        out.push_str(TRUNCATION_NOTICE);
        out.push('\n');
    }
    out.pop();
    out
}

pub fn render_prompts(
    spec: &BugSpec,
    context: Option<&HistoricalContext>,
    templates: &TemplateSet,
    vars: &PromptVars,
) -> Result<PromptBundle, TemplateError> {
    let mut bindings = vars.0.clone();
    bindings.insert("bug_id".into(), spec.bug_id.clone());
    bindings.insert("bug_report".into(), spec.bug_report.trim_end().to_string());
    bindings.insert("failing_tests".into(), render_failing_tests(spec));
    bindings.insert("fault_locations".into(), render_locations(spec));
    let history = context.map(render_history).unwrap_or_default();
    bindings.insert("has_history".into(), if context.is_some() { "1".into() } else { String::new() });
    bindings.insert("history".into(), history);
    let system_prompt = render_template(&templates.system, &bindings)?;
    let user_prompt = render_template(&templates.user, &bindings)?;
    let chars = system_prompt.chars().count() + user_prompt.chars().count();
    Ok(PromptBundle {
        system_prompt,
        user_prompt,
        token_estimate: chars.div_ceil(4),
        config: context.map_or(HeuristicKind::NonHistory, |c| c.kind),
    })
}
