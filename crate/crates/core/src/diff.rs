//! Unified diff parsing.
//!
//! Two views are offered: [`FixPatch`], a structured list of hunks used for
//! bug categorization and fault-location derivation, and [`split_raw`], which
//! cuts diff text into file headers and hunks while preserving every byte so
//! the pieces concatenate back to the original.

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static HUNK_HEADER: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@").unwrap());

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("line {line}: malformed hunk header `{text}`")]
    BadHunkHeader { line: usize, text: String },
    #[error("line {line}: hunk body line outside of a file section")]
    Orphan { line: usize },
    #[error("line {line}: hunk body shorter than its header declares")]
    Truncated { line: usize },
    #[error("hunk in {path} at -{old_start} has no removed or added lines")]
    EmptyHunk { path: String, old_start: u32 },
    #[error("hunks in {path} overlap or are out of order")]
    Overlap { path: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffLine {
    Context(String),
    Removed(String),
    Added(String),
}

/// One contiguous block of edits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub file_path: String,
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    pub removed_lines: u32,
    pub added_lines: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub body: Vec<DiffLine>,
}

impl Hunk {
    /// Build a hunk from counts alone (no body), e.g. for synthetic patches.
    pub fn from_counts(
        file_path: impl Into<String>,
        old_start: u32,
        removed_lines: u32,
        added_lines: u32,
    ) -> Self {
        Self {
            file_path: file_path.into(),
            old_start,
            old_len: removed_lines,
            new_start: old_start,
            new_len: added_lines,
            removed_lines,
            added_lines,
            body: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixPatch {
    pub hunks: Vec<Hunk>,
}

impl FixPatch {
    pub fn new(hunks: Vec<Hunk>) -> Result<Self, DiffError> {
        let patch = Self { hunks };
        patch.validate()?;
        Ok(patch)
    }

    pub fn is_empty(&self) -> bool {
        self.hunks.is_empty()
    }

    /// Distinct file paths in first-appearance order.
    pub fn files(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for h in &self.hunks {
            if !seen.contains(&h.file_path.as_str()) {
                seen.push(&h.file_path);
            }
        }
        seen
    }

    pub fn validate(&self) -> Result<(), DiffError> {
        for h in &self.hunks {
            if h.removed_lines == 0 && h.added_lines == 0 {
                return Err(DiffError::EmptyHunk {
                    path: h.file_path.clone(),
                    old_start: h.old_start,
                });
            }
        }
        for file in self.files() {
            let mut prev_end: Option<u32> = None;
            for h in self.hunks.iter().filter(|h| h.file_path == file) {
                // a pure insertion at -a,0 sits after line a, so it occupies a+1
                let start = if h.old_len == 0 { h.old_start + 1 } else { h.old_start };
                let end = start + h.old_len.max(1) - 1;
                if let Some(prev) = prev_end {
                    if start <= prev {
                        return Err(DiffError::Overlap { path: file.to_string() });
                    }
                }
                prev_end = Some(end);
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, DiffError> {
        let mut hunks = Vec::new();
        let mut current_path: Option<String> = None;
        let mut old_path: Option<String> = None;
        let lines: Vec<&str> = text.lines().collect();
        let mut i = 0;
        while i < lines.len() {
            let line = lines[i];
            if line.starts_with("diff --git ") {
                current_path = None;
                old_path = None;
            } else if let Some(rest) = line.strip_prefix("--- ") {
                old_path = strip_prefix_path(rest);
            } else if let Some(rest) = line.strip_prefix("+++ ") {
                current_path = strip_prefix_path(rest).or_else(|| old_path.clone());
            } else if line.starts_with("@@") {
                let caps = HUNK_HEADER.captures(line).ok_or_else(|| DiffError::BadHunkHeader {
                    line: i + 1,
                    text: line.to_string(),
                })?;
                let path = current_path.clone().ok_or(DiffError::Orphan { line: i + 1 })?;
                let num = |idx: usize, default: u32| {
                    caps.get(idx).map_or(default, |m| m.as_str().parse().unwrap_or(default))
                };
                let (old_start, old_len) = (num(1, 0), num(2, 1));
                let (new_start, new_len) = (num(3, 0), num(4, 1));
                let mut body = Vec::new();
                let (mut seen_old, mut seen_new) = (0u32, 0u32);
                let (mut removed, mut added) = (0u32, 0u32);
                i += 1;
                while (seen_old < old_len || seen_new < new_len) && i < lines.len() {
                    let l = lines[i];
                    if l.starts_with('\\') {
                        i += 1;
                        continue;
                    }
                    match l.chars().next() {
                        Some('-') => {
                            seen_old += 1;
                            removed += 1;
                            body.push(DiffLine::Removed(l[1..].to_string()));
                        }
                        Some('+') => {
                            seen_new += 1;
                            added += 1;
                            body.push(DiffLine::Added(l[1..].to_string()));
                        }
                        Some(' ') | None => {
                            seen_old += 1;
                            seen_new += 1;
                            body.push(DiffLine::Context(l.get(1..).unwrap_or("").to_string()));
                        }
                        _ => return Err(DiffError::Truncated { line: i + 1 }),
                    }
                    i += 1;
                }
                if seen_old < old_len || seen_new < new_len {
                    return Err(DiffError::Truncated { line: i });
                }
                hunks.push(Hunk {
                    file_path: path,
                    old_start,
                    old_len,
                    new_start,
                    new_len,
                    removed_lines: removed,
                    added_lines: added,
                    body,
                });
                continue;
            }
            i += 1;
        }
        // A diff with three lines of context may carry several edit blocks in
        // one hunk; split them so each hunk is a single contiguous block.
        let hunks = hunks.into_iter().flat_map(split_edit_blocks).collect();
        Self::new(hunks)
    }
}

fn strip_prefix_path(rest: &str) -> Option<String> {
    let rest = rest.split('\t').next().unwrap_or(rest).trim_end();
    if rest == "/dev/null" {
        return None;
    }
    let path = rest
        .strip_prefix("a/")
        .or_else(|| rest.strip_prefix("b/"))
        .unwrap_or(rest);
    Some(path.to_string())
}

/// Split a context-bearing hunk into zero-context hunks, one per maximal run
/// of removed/added lines.
fn split_edit_blocks(hunk: Hunk) -> Vec<Hunk> {
    if hunk.body.is_empty() {
        return vec![hunk];
    }
    let mut out = Vec::new();
    let (mut old_line, mut new_line) = (hunk.old_start, hunk.new_start);
    if hunk.old_len == 0 {
        old_line += 1;
    }
    if hunk.new_len == 0 {
        new_line += 1;
    }
    let mut block: Vec<DiffLine> = Vec::new();
    let mut block_old = old_line;
    let mut block_new = new_line;
    let flush = |block: &mut Vec<DiffLine>, old_at: u32, new_at: u32, out: &mut Vec<Hunk>| {
        if block.is_empty() {
            return;
        }
        let removed = block.iter().filter(|l| matches!(l, DiffLine::Removed(_))).count() as u32;
        let added = block.len() as u32 - removed;
        out.push(Hunk {
            file_path: hunk.file_path.clone(),
            // zero-length sides use the "line before" convention of unified diffs
            old_start: if removed == 0 { old_at - 1 } else { old_at },
            old_len: removed,
            new_start: if added == 0 { new_at - 1 } else { new_at },
            new_len: added,
            removed_lines: removed,
            added_lines: added,
            body: std::mem::take(block),
        });
    };
    for line in &hunk.body {
        match line {
            DiffLine::Context(_) => {
                flush(&mut block, block_old, block_new, &mut out);
                old_line += 1;
                new_line += 1;
                block_old = old_line;
                block_new = new_line;
            }
            DiffLine::Removed(_) => {
                block.push(line.clone());
                old_line += 1;
            }
            DiffLine::Added(_) => {
                block.push(line.clone());
                new_line += 1;
            }
        }
    }
    flush(&mut block, block_old, block_new, &mut out);
    out
}

/// One file's worth of a raw unified diff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFileDiff {
    /// `diff --git` line through `+++` (or the binary marker).
    pub header: String,
    pub hunks: Vec<String>,
    pub binary: bool,
}

impl RawFileDiff {
    pub fn len(&self) -> usize {
        self.header.len() + self.hunks.iter().map(String::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Split raw diff text into per-file sections; concatenating every header
/// and hunk in order reproduces `text` exactly.
pub fn split_raw(text: &str) -> Vec<RawFileDiff> {
    let mut files: Vec<RawFileDiff> = Vec::new();
    let mut in_hunk = false;
    for line in text.split_inclusive('\n') {
        if line.starts_with("diff --git ") || files.is_empty() {
            files.push(RawFileDiff { header: String::new(), hunks: Vec::new(), binary: false });
            in_hunk = false;
        }
        let file = files.last_mut().expect("pushed above");
        if line.starts_with("@@") {
            file.hunks.push(line.to_string());
            in_hunk = true;
        } else if in_hunk {
            file.hunks.last_mut().expect("in hunk").push_str(line);
        } else {
            if line.starts_with("Binary files ") || line.starts_with("GIT binary patch") {
                file.binary = true;
            }
            file.header.push_str(line);
        }
    }
    files
}
