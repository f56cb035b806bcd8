//! Run records and their line-delimited persistence.
//!
//! A record file holds one JSON object per line: a `meta` line, one
//! `message` line per transcript message, and a closing `result` line.

use std::path::{Path, PathBuf};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Role, Termination, TokenUsage};
use crate::context::HeuristicKind;
use crate::sandbox::TestVerdict;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationMeta {
    pub exit_code: i32,
    pub timed_out: bool,
    /// Wall-clock field.
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestVerdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMessage {
    pub role: Role,
    pub content: String,
    pub step_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<TokenUsage>,
    /// Command parsed from an assistant message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationMeta>,
}

impl TranscriptMessage {
    pub fn plain(role: Role, content: impl Into<String>, step_index: u32) -> Self {
        Self { role, content: content.into(), step_index, token_usage: None, action: None, observation: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub bug_id: String,
    pub config: HeuristicKind,
    pub model: String,
    pub transcript: Vec<TranscriptMessage>,
    pub steps_taken: u32,
    /// Agent query cost plus `judge_cost` when present.
    pub total_cost: Decimal,
    /// Cost of commit-judge queries folded into `total_cost`.
    pub judge_cost: Option<Decimal>,
    pub usage: TokenUsage,
    /// Wall-clock field.
    pub wall_time_ms: u64,
    pub termination: Termination,
    pub termination_detail: Option<String>,
    pub tests_passed_at_end: bool,
    /// `None` when the worktree was unavailable.
    pub final_patch: Option<String>,
}

impl RunRecord {
    /// Copy with every wall-clock field zeroed, for replay comparisons.
    pub fn without_wall_clock(&self) -> Self {
        let mut r = self.clone();
        r.wall_time_ms = 0;
        for m in &mut r.transcript {
            if let Some(o) = &mut m.observation {
                o.duration_ms = 0;
            }
        }
        r
    }

    pub fn add_judge_cost(&mut self, cost: Decimal) {
        self.total_cost += cost;
        self.judge_cost = Some(self.judge_cost.unwrap_or_default() + cost);
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: Line<'_>| {
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        };
        push(Line::Meta(MetaLine {
            schema_version: RECORD_SCHEMA_VERSION,
            bug_id: self.bug_id.as_str().into(),
            config: self.config,
            model: self.model.as_str().into(),
        }));
        for m in &self.transcript {
            push(Line::Message(std::borrow::Cow::Borrowed(m)));
        }
        push(Line::Result(ResultLine {
            steps_taken: self.steps_taken,
            total_cost: self.total_cost,
            judge_cost: self.judge_cost,
            usage: self.usage,
            wall_time_ms: self.wall_time_ms,
            termination: self.termination,
            termination_detail: self.termination_detail.as_deref().map(Into::into),
            tests_passed_at_end: self.tests_passed_at_end,
            final_patch: self.final_patch.as_deref().map(Into::into),
        }));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, RecordError> {
        let mut meta = None;
        let mut transcript = Vec::new();
        let mut result = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: Line<'static> =
                serde_json::from_str(line).map_err(|e| RecordError::Malformed(format!("line {}: {e}", i + 1)))?;
            match parsed {
                Line::Meta(m) if meta.is_none() && transcript.is_empty() => meta = Some(m),
                Line::Message(m) if meta.is_some() && result.is_none() => transcript.push(m.into_owned()),
                Line::Result(r) if meta.is_some() && result.is_none() => result = Some(r),
                _ => return Err(RecordError::Malformed(format!("line {} is out of order", i + 1))),
            }
        }
        let meta = meta.ok_or_else(|| RecordError::Malformed("missing meta line".into()))?;
        let result = result.ok_or(RecordError::Incomplete)?;
        if meta.schema_version != RECORD_SCHEMA_VERSION {
            return Err(RecordError::Malformed(format!("unsupported schema version {}", meta.schema_version)));
        }
        Ok(Self {
            bug_id: meta.bug_id.into_owned(),
            config: meta.config,
            model: meta.model.into_owned(),
            transcript,
            steps_taken: result.steps_taken,
            total_cost: result.total_cost,
            judge_cost: result.judge_cost,
            usage: result.usage,
            wall_time_ms: result.wall_time_ms,
            termination: result.termination,
            termination_detail: result.termination_detail.map(|c| c.into_owned()),
            tests_passed_at_end: result.tests_passed_at_end,
            final_patch: result.final_patch.map(|c| c.into_owned()),
        })
    }

    /// Write atomically (temp file then rename) so a killed writer never
    /// leaves a partial record behind.
    pub fn write_to(&self, path: &Path) -> Result<(), RecordError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("jsonl.tmp");
        std::fs::write(&tmp, self.to_jsonl())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self, RecordError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

/// `<dir>/<bug_id>__<config>.jsonl`, with path separators in the id replaced.
pub fn record_path(dir: &Path, bug_id: &str, config: HeuristicKind) -> PathBuf {
    let safe: String = bug_id.chars().map(|c| if c == '/' || c == '\\' { '_' } else { c }).collect();
    dir.join(format!("{safe}__{config}.jsonl"))
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("malformed run record: {0}")]
    Malformed(String),
    #[error("run record has no result line")]
    Incomplete,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

use std::borrow::Cow;

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line<'a> {
    Meta(MetaLine<'a>),
    Message(Cow<'a, TranscriptMessage>),
    Result(ResultLine<'a>),
}

#[derive(Serialize, Deserialize)]
struct MetaLine<'a> {
    schema_version: u32,
    bug_id: Cow<'a, str>,
    config: HeuristicKind,
    model: Cow<'a, str>,
}

#[derive(Serialize, Deserialize)]
struct ResultLine<'a> {
    steps_taken: u32,
    total_cost: Decimal,
    judge_cost: Option<Decimal>,
    usage: TokenUsage,
    wall_time_ms: u64,
    termination: Termination,
    termination_detail: Option<Cow<'a, str>>,
    tests_passed_at_end: bool,
    final_patch: Option<Cow<'a, str>>,
}
