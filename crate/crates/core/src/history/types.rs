use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HistoryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Modified,
    Deleted,
    /// New code goes in before this line; may equal file length + 1.
    InsertionPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultLine {
    pub line: u32,
    pub kind: EditKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultLocation {
    pub file_path: String,
    pub lines: Vec<FaultLine>,
}

impl FaultLocation {
    pub fn new(file_path: impl Into<String>, lines: Vec<FaultLine>) -> Result<Self, HistoryError> {
        let loc = Self { file_path: file_path.into(), lines };
        loc.validate()?;
        Ok(loc)
    }

    pub fn validate(&self) -> Result<(), HistoryError> {
        if self.lines.is_empty() {
            return Err(HistoryError::InvalidLocation(format!("{}: no lines", self.file_path)));
        }
        let mut prev = 0u32;
        for l in &self.lines {
            if l.line < 1 || l.line <= prev {
                return Err(HistoryError::InvalidLocation(format!(
                    "{}: line numbers must be >= 1 and strictly increasing",
                    self.file_path
                )));
            }
            prev = l.line;
        }
        Ok(())
    }

    pub fn blameable_lines(&self) -> impl Iterator<Item = u32> + '_ {
        self.lines.iter().filter(|l| l.kind != EditKind::InsertionPoint).map(|l| l.line)
    }

    pub fn insertion_points(&self) -> impl Iterator<Item = u32> + '_ {
        self.lines.iter().filter(|l| l.kind == EditKind::InsertionPoint).map(|l| l.line)
    }

    pub fn is_insertion_only(&self) -> bool {
        self.lines.iter().all(|l| l.kind == EditKind::InsertionPoint)
    }
}

/// One repair task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugSpec {
    pub bug_id: String,
    pub snapshot_ref: String,
    pub locations: Vec<FaultLocation>,
    pub failing_tests: Vec<String>,
    pub bug_report: String,
}

impl BugSpec {
    pub fn validate(&self) -> Result<(), HistoryError> {
        if self.locations.is_empty() {
            return Err(HistoryError::InvalidLocation(format!("{}: no fault locations", self.bug_id)));
        }
        self.locations.iter().try_for_each(FaultLocation::validate)
    }

    pub fn is_insertion_only(&self) -> bool {
        self.locations.iter().all(FaultLocation::is_insertion_only)
    }
}

/// How a fallback anchor was found for an insertion point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "window", rename_all = "snake_case")]
pub enum FallbackWindow {
    /// Within the five lines preceding the insertion.
    Primary,
    /// Found after widening the window `extensions` times by five lines.
    Extended { extensions: u32 },
    /// No executable line above the insertion; the commit that added the
    /// file stands in.
    FileOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlameEntry {
    pub file_path: String,
    /// Line in the snapshot that was blamed (the anchor line for fallbacks,
    /// the insertion line for a file-origin fallback).
    pub line_number: u32,
    pub commit_id: String,
    pub author_time: i64,
    pub is_fallback: bool,
    /// Path and line of the same content inside the blamed commit.
    pub orig_path: String,
    pub orig_line: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insertion_line: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_window: Option<FallbackWindow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Blameability {
    Blameable,
    Blameless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionMethod {
    Single,
    Judge,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlameSummary {
    pub bug_id: String,
    pub entries: Vec<BlameEntry>,
    pub blameability: Blameability,
    pub unique_commits: BTreeSet<String>,
    pub resolved_commit: String,
    pub resolution_method: ResolutionMethod,
    /// Token usage spent by an LLM judge, if one was consulted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_usage: Option<crate::agent::TokenUsage>,
}

impl BlameSummary {
    /// Entries that point at the resolved commit, in location order.
    pub fn resolved_entries(&self) -> impl Iterator<Item = &BlameEntry> {
        self.entries.iter().filter(move |e| e.commit_id == self.resolved_commit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BugCategory {
    SL,
    SH,
    SFMH,
    MFMH,
}

impl BugCategory {
    pub const ALL: [BugCategory; 4] = [Self::SL, Self::SH, Self::SFMH, Self::MFMH];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SL => "SL",
            Self::SH => "SH",
            Self::SFMH => "SFMH",
            Self::MFMH => "MFMH",
        }
    }
}

impl fmt::Display for BugCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BugCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SL" => Ok(Self::SL),
            "SH" => Ok(Self::SH),
            "SFMH" => Ok(Self::SFMH),
            "MFMH" => Ok(Self::MFMH),
            other => Err(format!("unknown bug category `{other}`")),
        }
    }
}
