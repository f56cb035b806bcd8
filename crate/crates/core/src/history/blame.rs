use std::collections::{BTreeMap, BTreeSet};

use super::classify::executable_lines;
use super::judge::{CommitJudge, JudgeCandidate, JudgeRequest};
use super::porcelain;
use super::types::*;
use super::HistoryError;
use crate::git::Repo;

/// Width of the fallback scan window above an insertion point.
pub const FALLBACK_WINDOW: u32 = 5;

/// A repository pinned at a bug's buggy snapshot.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub repo: Repo,
    pub rev: String,
}

impl Snapshot {
    pub fn new(repo: Repo, rev: impl Into<String>) -> Self {
        Self { repo, rev: rev.into() }
    }

    pub fn file(&self, path: &str) -> Result<Option<String>, HistoryError> {
        Ok(self.repo.show_file(&self.rev, path)?)
    }

    fn require_file(&self, path: &str) -> Result<String, HistoryError> {
        self.file(path)?
            .ok_or_else(|| HistoryError::FileNotInSnapshot { path: path.to_string() })
    }

    fn blame_range(&self, path: &str, first: u32, last: u32) -> Result<Vec<porcelain::PorcelainLine>, HistoryError> {
        let out = self.repo.blame_porcelain(&self.rev, path, first as usize, last as usize)?;
        porcelain::parse(&out)
    }
}

fn line_count(text: &str) -> u32 {
    text.lines().count() as u32
}

fn entry_from(path: &str, line: &porcelain::PorcelainLine, fallback: Option<(u32, FallbackWindow)>) -> BlameEntry {
    BlameEntry {
        file_path: path.to_string(),
        line_number: line.final_line,
        commit_id: line.commit.clone(),
        author_time: line.header.author_time,
        is_fallback: fallback.is_some(),
        orig_path: line.filename.clone(),
        orig_line: line.orig_line,
        insertion_line: fallback.map(|(l, _)| l),
        fallback_window: fallback.map(|(_, w)| w),
    }
}

/// Blame every modified or deleted line of `location`; insertion points
/// produce no entries here.
pub fn blame_lines(snap: &Snapshot, location: &FaultLocation) -> Result<Vec<BlameEntry>, HistoryError> {
    location.validate()?;
    let wanted: Vec<u32> = location.blameable_lines().collect();
    let (Some(&first), Some(&last)) = (wanted.first(), wanted.last()) else {
        return Ok(Vec::new());
    };
    let text = snap.require_file(&location.file_path)?;
    let len = line_count(&text);
    if let Some(&bad) = wanted.iter().find(|&&l| l > len) {
        return Err(HistoryError::LineOutOfRange { path: location.file_path.clone(), line: bad, len });
    }
    let blamed = snap.blame_range(&location.file_path, first, last)?;
    let mut entries = Vec::with_capacity(wanted.len());
    for line in wanted {
        let hit = blamed
            .iter()
            .find(|b| b.final_line == line)
            .ok_or_else(|| HistoryError::PorcelainParse(format!("no blame record for line {line}")))?;
        entries.push(entry_from(&location.file_path, hit, None));
    }
    Ok(entries)
}

/// Blame the nearest executable line within the five lines preceding the
/// insertion point `line`.
pub fn fallback_blame(snap: &Snapshot, path: &str, line: u32) -> Result<BlameEntry, HistoryError> {
    let (_, flags) = fallback_source(snap, path, line)?;
    let lo = line.saturating_sub(FALLBACK_WINDOW).max(1);
    scan_window(snap, path, line, &flags, lo, line.saturating_sub(1), FallbackWindow::Primary)?
        .ok_or(HistoryError::NoFallbackAnchor { path: path.to_string(), line })
}

/// [`fallback_blame`], widening the window upward in five-line steps when it
/// holds no executable line, and finally falling back to the commit that
/// added the file.
pub fn fallback_blame_extended(snap: &Snapshot, path: &str, line: u32) -> Result<BlameEntry, HistoryError> {
    match fallback_blame(snap, path, line) {
        Err(HistoryError::NoFallbackAnchor { .. }) => {}
        other => return other,
    }
    let (_, flags) = fallback_source(snap, path, line)?;
    let mut extensions = 1u32;
    loop {
        let hi = line.saturating_sub(FALLBACK_WINDOW * extensions + 1);
        if hi < 1 {
            break;
        }
        let lo = line.saturating_sub(FALLBACK_WINDOW * (extensions + 1)).max(1);
        if let Some(entry) =
            scan_window(snap, path, line, &flags, lo, hi, FallbackWindow::Extended { extensions })?
        {
            return Ok(entry);
        }
        extensions += 1;
    }
    let commit = snap
        .repo
        .commit_adding(&snap.rev, path)?
        .ok_or(HistoryError::NoFallbackAnchor { path: path.to_string(), line })?;
    Ok(BlameEntry {
        file_path: path.to_string(),
        line_number: line,
        author_time: snap.repo.author_time(&commit)?,
        commit_id: commit,
        is_fallback: true,
        orig_path: path.to_string(),
        orig_line: 0,
        insertion_line: Some(line),
        fallback_window: Some(FallbackWindow::FileOrigin),
    })
}

fn fallback_source(snap: &Snapshot, path: &str, line: u32) -> Result<(String, Vec<bool>), HistoryError> {
    let text = snap
        .file(path)?
        .ok_or_else(|| HistoryError::NewFileNoHistory { path: path.to_string() })?;
    let len = line_count(&text);
    if line < 1 || line > len + 1 {
        return Err(HistoryError::LineOutOfRange { path: path.to_string(), line, len });
    }
    let flags = executable_lines(&text);
    Ok((text, flags))
}

fn scan_window(
    snap: &Snapshot,
    path: &str,
    insertion: u32,
    flags: &[bool],
    lo: u32,
    hi: u32,
    window: FallbackWindow,
) -> Result<Option<BlameEntry>, HistoryError> {
    if hi < lo || hi == 0 {
        return Ok(None);
    }
    let Some(anchor) = (lo..=hi).rev().find(|&l| flags.get(l as usize - 1).copied().unwrap_or(false)) else {
        return Ok(None);
    };
    let blamed = snap.blame_range(path, anchor, anchor)?;
    let hit = blamed
        .first()
        .ok_or_else(|| HistoryError::PorcelainParse(format!("no blame record for line {anchor}")))?;
    Ok(Some(entry_from(path, hit, Some((insertion, window)))))
}

/// Lines of `text` around `line` (1-based), `radius` on each side.
fn excerpt(text: &str, line: u32, radius: u32) -> String {
    let lo = line.saturating_sub(radius).max(1) as usize;
    let hi = (line + radius) as usize;
    text.lines()
        .enumerate()
        .filter(|(i, _)| (lo..=hi).contains(&(i + 1)))
        .map(|(i, l)| format!("{:>5} | {l}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Resolve one historical commit for a bug.
pub fn summarize_blame(
    snap: &Snapshot,
    spec: &BugSpec,
    judge: &dyn CommitJudge,
) -> Result<BlameSummary, HistoryError> {
    spec.validate()?;
    let mut entries = Vec::new();
    for loc in &spec.locations {
        entries.extend(blame_lines(snap, loc)?);
    }
    let unique: BTreeSet<String> = entries.iter().map(|e| e.commit_id.clone()).collect();

    if !spec.is_insertion_only() {
        let (resolved, method, usage) = match unique.len() {
            1 => (unique.iter().next().cloned().expect("one element"), ResolutionMethod::Single, None),
            _ => {
                let request = judge_request(snap, spec, &entries, &unique)?;
                let decision = judge.choose(&request).map_err(|reason| HistoryError::Judge {
                    bug_id: spec.bug_id.clone(),
                    candidates: unique.iter().cloned().collect(),
                    reason,
                })?;
                let pick = request.candidates.get(decision.index).ok_or_else(|| HistoryError::Judge {
                    bug_id: spec.bug_id.clone(),
                    candidates: unique.iter().cloned().collect(),
                    reason: format!("judge picked index {} of {}", decision.index, request.candidates.len()),
                })?;
                (pick.commit_id.clone(), ResolutionMethod::Judge, decision.usage)
            }
        };
        return Ok(BlameSummary {
            bug_id: spec.bug_id.clone(),
            entries,
            blameability: Blameability::Blameable,
            unique_commits: unique,
            resolved_commit: resolved,
            resolution_method: method,
            judge_usage: usage,
        });
    }

    let mut fallbacks = Vec::new();
    for loc in &spec.locations {
        for line in loc.insertion_points() {
            match fallback_blame_extended(snap, &loc.file_path, line) {
                Ok(e) => fallbacks.push(e),
                Err(HistoryError::NewFileNoHistory { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let resolved = most_frequent_commit(&fallbacks)
        .ok_or_else(|| HistoryError::NoHistoryAvailable { bug_id: spec.bug_id.clone() })?;
    Ok(BlameSummary {
        bug_id: spec.bug_id.clone(),
        entries: fallbacks,
        blameability: Blameability::Blameless,
        unique_commits: BTreeSet::new(),
        resolved_commit: resolved,
        resolution_method: ResolutionMethod::Fallback,
        judge_usage: None,
    })
}

/// Most frequent commit; ties go to the most recent author time, then to the
/// lexicographically smallest hash.
pub fn most_frequent_commit(entries: &[BlameEntry]) -> Option<String> {
    let mut tally: BTreeMap<&str, (usize, i64)> = BTreeMap::new();
    for e in entries {
        let slot = tally.entry(&e.commit_id).or_insert((0, e.author_time));
        slot.0 += 1;
        slot.1 = slot.1.max(e.author_time);
    }
    tally
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(a.1 .1.cmp(&b.1 .1)).then(b.0.cmp(a.0)))
        .map(|(c, _)| c.to_string())
}

fn judge_request(
    snap: &Snapshot,
    spec: &BugSpec,
    entries: &[BlameEntry],
    unique: &BTreeSet<String>,
) -> Result<JudgeRequest, HistoryError> {
    let mut files: BTreeMap<&str, String> = BTreeMap::new();
    for e in entries {
        if !files.contains_key(e.file_path.as_str()) {
            files.insert(&e.file_path, snap.file(&e.file_path)?.unwrap_or_default());
        }
    }
    let mut candidates = Vec::with_capacity(unique.len());
    for commit in unique {
        let snippets = entries
            .iter()
            .filter(|e| &e.commit_id == commit)
            .map(|e| {
                let text = &files[e.file_path.as_str()];
                format!("{}:{}\n{}", e.file_path, e.line_number, excerpt(text, e.line_number, 3))
            })
            .collect();
        candidates.push(JudgeCandidate {
            commit_id: commit.clone(),
            subject: snap.repo.subject(commit)?,
            snippets,
        });
    }
    Ok(JudgeRequest {
        bug_id: spec.bug_id.clone(),
        bug_report: spec.bug_report.clone(),
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(commit: &str, time: i64) -> BlameEntry {
        BlameEntry {
            file_path: "f".into(),
            line_number: 1,
            commit_id: commit.into(),
            author_time: time,
            is_fallback: true,
            orig_path: "f".into(),
            orig_line: 1,
            insertion_line: Some(2),
            fallback_window: Some(FallbackWindow::Primary),
        }
    }

    #[test]
    fn frequency_then_recency() {
        let es = vec![entry("a", 10), entry("b", 20), entry("a", 10)];
        assert_eq!(most_frequent_commit(&es).as_deref(), Some("a"));
        let tie = vec![entry("a", 10), entry("b", 20)];
        assert_eq!(most_frequent_commit(&tie).as_deref(), Some("b"));
        let full_tie = vec![entry("b", 5), entry("a", 5)];
        assert_eq!(most_frequent_commit(&full_tie).as_deref(), Some("a"));
        assert_eq!(most_frequent_commit(&[]), None);
    }

    #[test]
    fn excerpt_is_clamped() {
        let text = "a\nb\nc\nd\n";
        assert_eq!(excerpt(text, 1, 3).lines().count(), 4);
        assert!(excerpt(text, 4, 1).contains("    3 | c"));
    }
}
