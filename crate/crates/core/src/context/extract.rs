use serde::{Deserialize, Serialize};

use super::functions::{detect_function_span, function_names, span_for, window_span, BoundaryDetector, SpanError};
use super::truncate::truncate;
use super::*;
use crate::git::{ChangeStatus, Repo};
use crate::history::{BlameEntry, BlameSummary};

/// Character budgets for each heuristic's payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    pub fl_diff: usize,
    /// Shared by both sides; each side gets half.
    pub fn_pair: usize,
    pub fn_all: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self { fl_diff: 12_000, fn_pair: 8_000, fn_all: 4_000 }
    }
}

impl Budgets {
    pub fn for_kind(&self, kind: HeuristicKind) -> Option<usize> {
        match kind {
            HeuristicKind::NonHistory => None,
            HeuristicKind::FnAll => Some(self.fn_all),
            HeuristicKind::FnPair => Some(self.fn_pair),
            HeuristicKind::FlDiff => Some(self.fl_diff),
        }
    }
}

/// Function names of every file the commit changed, read from the
/// post-commit version (empty for deleted files).
pub fn extract_fn_all(repo: &Repo, commit: &str, detector: &dyn BoundaryDetector) -> Result<HistoryPayload, ContextError> {
    let mut files = Vec::new();
    for changed in repo.changed_files(commit)? {
        if changed.status == ChangeStatus::Deleted {
            files.push(FileFunctions { path: changed.path, names: Vec::new(), warning: None });
            continue;
        }
        let entry = match repo.show_bytes(commit, &changed.path) {
            Ok(Some(bytes)) => match String::from_utf8(bytes) {
                Ok(text) => match function_names(detector, &text) {
                    Ok(names) => FileFunctions { path: changed.path, names, warning: None },
                    Err(e) => FileFunctions { path: changed.path, names: Vec::new(), warning: Some(e.to_string()) },
                },
                Err(_) => FileFunctions {
                    path: changed.path,
                    names: Vec::new(),
                    warning: Some("not a text file".into()),
                },
            },
            Ok(None) => FileFunctions { path: changed.path, names: Vec::new(), warning: None },
            Err(e) => FileFunctions { path: changed.path, names: Vec::new(), warning: Some(e.to_string()) },
        };
        files.push(entry);
    }
    Ok(HistoryPayload::FnAll { files })
}

/// Before/after bodies of the function holding the blamed line. The after
/// side is the function containing the line inside the blame commit; the
/// before side is the same-named function in the commit's first parent.
pub fn extract_fn_pair(
    repo: &Repo,
    commit: &str,
    entry: &BlameEntry,
    detector: &dyn BoundaryDetector,
) -> Result<HistoryPayload, ContextError> {
    let unavailable = || ContextError::FnPairUnavailable { commit: commit.to_string() };
    if entry.orig_line == 0 {
        return Err(unavailable());
    }
    let after_text = repo.show_file(commit, &entry.orig_path)?.ok_or_else(unavailable)?;
    let after = match detect_function_span(detector, &entry.orig_path, &after_text, entry.orig_line) {
        Ok(span) => span,
        Err(SpanError::DetectorFailure(_)) => {
            return Ok(HistoryPayload::FnPair {
                before: None,
                after: Some(window_span(&entry.orig_path, &after_text, entry.orig_line, 20)),
            })
        }
        Err(_) => return Err(unavailable()),
    };
    let before = match repo.first_parent(commit)? {
        None => None,
        Some(parent) => match repo.show_file(&parent, &entry.orig_path)? {
            None => None,
            Some(text) => match detector.functions(&text) {
                Ok(defs) => defs
                    .iter()
                    .filter(|d| d.name == after.name)
                    .min_by_key(|d| (d.start_line as i64 - after.start_line as i64).abs())
                    .map(|d| span_for(&entry.orig_path, &text, d)),
                Err(_) => None,
            },
        },
    };
    Ok(HistoryPayload::FnPair { before, after: Some(after) })
}

/// Unified diff of the commit against its first parent, three lines of
/// context.
pub fn extract_fl_diff(repo: &Repo, commit: &str) -> Result<HistoryPayload, ContextError> {
    Ok(HistoryPayload::FlDiff { diff: repo.commit_diff(commit, 3)? })
}

/// Build (and truncate) the historical context for one heuristic from a
/// resolved blame summary. `NonHistory` yields `None`.
pub fn build_context(
    repo: &Repo,
    summary: &BlameSummary,
    kind: HeuristicKind,
    detector: &dyn BoundaryDetector,
    budgets: &Budgets,
) -> Result<Option<HistoricalContext>, ContextError> {
    let Some(budget) = budgets.for_kind(kind) else {
        return Ok(None);
    };
    let commit = &summary.resolved_commit;
    let mut notice = None;
    let payload = match kind {
        HeuristicKind::NonHistory => unreachable!("handled above"),
        HeuristicKind::FnAll => extract_fn_all(repo, commit, detector)?,
        HeuristicKind::FlDiff => extract_fl_diff(repo, commit)?,
        HeuristicKind::FnPair => {
            let mut found = None;
            for entry in summary.resolved_entries() {
                match extract_fn_pair(repo, commit, entry, detector) {
                    Ok(p) => {
                        found = Some(p);
                        break;
                    }
                    Err(ContextError::FnPairUnavailable { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            found.unwrap_or_else(|| {
                notice = Some(format!(
                    "Function-level history is unavailable: no function in commit {} contains the blamed lines.",
                    short(commit)
                ));
                HistoryPayload::FnPair { before: None, after: None }
            })
        }
    };
    let ctx = HistoricalContext {
        kind,
        commit_id: commit.clone(),
        commit_message: repo.message(commit)?,
        payload,
        truncated: false,
        notice,
    };
    Ok(Some(truncate(ctx, budget)))
}

fn short(commit: &str) -> &str {
    &commit[..commit.len().min(12)]
}
