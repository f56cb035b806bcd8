use std::collections::BTreeMap;

use super::types::{BugCategory, EditKind, FaultLine, FaultLocation};
use super::HistoryError;
use crate::diff::{DiffLine, FixPatch, Hunk};

/// Lines a hunk edits: a removed/added pair is one modified line, so the
/// count is the larger side.
pub fn changed_lines(hunk: &Hunk) -> u32 {
    hunk.removed_lines.max(hunk.added_lines)
}

pub fn categorize_bug(patch: &FixPatch) -> Result<BugCategory, HistoryError> {
    if patch.is_empty() {
        return Err(HistoryError::EmptyPatch);
    }
    let files = patch.files().len();
    let hunks = patch.hunks.len();
    Ok(if files >= 2 {
        BugCategory::MFMH
    } else if hunks >= 2 {
        BugCategory::SFMH
    } else if changed_lines(&patch.hunks[0]) == 1 {
        BugCategory::SL
    } else {
        BugCategory::SH
    })
}

/// Perfect fault localization derived from a developer fix: removed lines
/// become modified (when the block also adds code) or deleted lines, and
/// add-only blocks become insertion points.
pub fn locations_from_patch(patch: &FixPatch) -> Vec<FaultLocation> {
    let mut per_file: BTreeMap<&str, BTreeMap<u32, EditKind>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for h in &patch.hunks {
        if !order.contains(&h.file_path.as_str()) {
            order.push(&h.file_path);
        }
        let lines = per_file.entry(&h.file_path).or_default();
        if h.removed_lines == 0 {
            lines.entry(h.old_start + 1).or_insert(EditKind::InsertionPoint);
            continue;
        }
        let kind = if h.added_lines > 0 { EditKind::Modified } else { EditKind::Deleted };
        let removed: Vec<u32> = if h.body.is_empty() {
            (h.old_start..h.old_start + h.removed_lines).collect()
        } else {
            let mut at = h.old_start;
            let mut out = Vec::new();
            for l in &h.body {
                match l {
                    DiffLine::Removed(_) => {
                        out.push(at);
                        at += 1;
                    }
                    DiffLine::Context(_) => at += 1,
                    DiffLine::Added(_) => {}
                }
            }
            out
        };
        for line in removed {
            lines.insert(line, kind);
        }
    }
    order
        .into_iter()
        .map(|path| FaultLocation {
            file_path: path.to_string(),
            lines: per_file[path].iter().map(|(&line, &kind)| FaultLine { line, kind }).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(hunks: Vec<Hunk>) -> FixPatch {
        FixPatch::new(hunks).unwrap()
    }

    #[test]
    fn single_line() {
        let p = patch(vec![Hunk::from_counts("A.java", 10, 1, 1)]);
        assert_eq!(categorize_bug(&p).unwrap(), BugCategory::SL);
        let add_one = patch(vec![Hunk::from_counts("A.java", 10, 0, 1)]);
        assert_eq!(categorize_bug(&add_one).unwrap(), BugCategory::SL);
    }

    #[test]
    fn single_hunk() {
        let p = patch(vec![Hunk::from_counts("A.java", 10, 1, 2)]);
        assert_eq!(categorize_bug(&p).unwrap(), BugCategory::SH);
    }

    #[test]
    fn multi_hunk_single_file() {
        let p = patch(vec![Hunk::from_counts("A.java", 10, 1, 1), Hunk::from_counts("A.java", 20, 1, 1)]);
        assert_eq!(categorize_bug(&p).unwrap(), BugCategory::SFMH);
    }

    #[test]
    fn multi_file() {
        let p = patch(vec![Hunk::from_counts("A.java", 10, 1, 1), Hunk::from_counts("B.java", 3, 1, 1)]);
        assert_eq!(categorize_bug(&p).unwrap(), BugCategory::MFMH);
    }

    #[test]
    fn empty_patch() {
        assert!(matches!(categorize_bug(&FixPatch::default()), Err(HistoryError::EmptyPatch)));
    }

    #[test]
    fn locations_cover_each_hunk_kind() {
        let p = patch(vec![
            Hunk::from_counts("A.java", 4, 2, 1),
            Hunk::from_counts("A.java", 9, 0, 3),
            Hunk::from_counts("B.java", 7, 1, 0),
        ]);
        let locs = locations_from_patch(&p);
        assert_eq!(locs.len(), 2);
        assert_eq!(
            locs[0].lines,
            vec![
                FaultLine { line: 4, kind: EditKind::Modified },
                FaultLine { line: 5, kind: EditKind::Modified },
                FaultLine { line: 10, kind: EditKind::InsertionPoint },
            ]
        );
        assert_eq!(locs[1].lines, vec![FaultLine { line: 7, kind: EditKind::Deleted }]);
        assert!(locs.iter().all(|l| l.validate().is_ok()));
    }
}
