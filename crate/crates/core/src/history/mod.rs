//! Resolving the historical commit that explains each bug.

mod blame;
mod category;
mod classify;
mod judge;
pub mod porcelain;
mod study;
mod types;

pub use blame::{
    blame_lines, fallback_blame, fallback_blame_extended, most_frequent_commit, summarize_blame, Snapshot,
    FALLBACK_WINDOW,
};
pub use category::{categorize_bug, changed_lines, locations_from_patch};
pub use classify::executable_lines;
pub use judge::{
    parse_judge_answer, render_judge_prompt, CommitJudge, FirstCandidateJudge, FixedJudge, JudgeCandidate,
    JudgeDecision, JudgeRequest, LlmJudge,
};
pub use study::{availability_report, study_bug, AvailabilityReport, CategoryCounts, Exclusion, StudyItem, StudyRow};
pub use types::*;

use thiserror::Error;

use crate::git::GitError;

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("invalid fault location: {0}")]
    InvalidLocation(String),
    #[error("file {path} does not exist in the snapshot")]
    FileNotInSnapshot { path: String },
    #[error("line {line} is out of range for {path} ({len} lines)")]
    LineOutOfRange { path: String, line: u32, len: u32 },
    #[error("version control tool error: {0}")]
    ToolError(#[from] GitError),
    #[error("blame output parse error: {0}")]
    PorcelainParse(String),
    #[error("no executable line precedes insertion point {path}:{line}")]
    NoFallbackAnchor { path: String, line: u32 },
    #[error("{path} is new in the fix and has no history")]
    NewFileNoHistory { path: String },
    #[error("bug {bug_id} has no blameable line and no fallback anchor")]
    NoHistoryAvailable { bug_id: String },
    #[error("judge failed for bug {bug_id} over candidates {candidates:?}: {reason}")]
    Judge { bug_id: String, candidates: Vec<String>, reason: String },
    #[error("fix patch is empty")]
    EmptyPatch,
}
