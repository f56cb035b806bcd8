//! Historical context extraction and prompt rendering.

mod extract;
mod functions;
mod prompt;
mod template;
mod truncate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{build_context, extract_fl_diff, extract_fn_all, extract_fn_pair, Budgets};
pub use functions::{
    detect_function_span, function_names, slice_lines, span_for, window_span, BoundaryDetector, CFamilyDetector,
    FunctionDef, FunctionSpan, SpanError, SpanSource,
};
pub use prompt::{render_history, render_prompts, PromptBundle, PromptVars, TemplateSet};
pub use template::{render_template, TemplateError};
pub use truncate::{payload_len, truncate, TRUNCATION_NOTICE};

use crate::git::GitError;
use crate::history::HistoryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    NonHistory,
    FnAll,
    FnPair,
    FlDiff,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 4] = [Self::NonHistory, Self::FnAll, Self::FnPair, Self::FlDiff];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NonHistory => "non_history",
            Self::FnAll => "fn_all",
            Self::FnPair => "fn_pair",
            Self::FlDiff => "fl_diff",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.as_str().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown heuristic `{s}` (expected non_history, fn_all, fn_pair or fl_diff)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileFunctions {
    pub path: String,
    pub names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryPayload {
    FnAll { files: Vec<FileFunctions> },
    FnPair { before: Option<FunctionSpan>, after: Option<FunctionSpan> },
    FlDiff { diff: String },
}

impl HistoryPayload {
    pub fn kind(&self) -> HeuristicKind {
        match self {
            Self::FnAll { .. } => HeuristicKind::FnAll,
            Self::FnPair { .. } => HeuristicKind::FnPair,
            Self::FlDiff { .. } => HeuristicKind::FlDiff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoricalContext {
    pub kind: HeuristicKind,
    pub commit_id: String,
    pub commit_message: String,
    pub payload: HistoryPayload,
    pub truncated: bool,
    /// Shown to the agent when the heuristic could not be fully built.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error(transparent)]
    Git(#[from] GitError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("no function contains the blamed line on either side of commit {commit}")]
    FnPairUnavailable { commit: String },
    #[error("non_history carries no historical context")]
    NoPayloadForNonHistory,
}
