//! Budgeted truncation of historical payloads.
//!
//! Budgets count characters of payload text. Cuts land on hunk, file or
//! line boundaries; the truncation notice is appended at render time and is
//! not part of the payload, which keeps `truncate` idempotent.

use super::{FileFunctions, FunctionSpan, HistoricalContext, HistoryPayload};
use crate::diff::split_raw;

pub const TRUNCATION_NOTICE: &str = "[... historical context truncated to fit the prompt budget ...]";

fn clen(s: &str) -> usize {
    s.chars().count()
}

/// Character length of the payload text that the budget applies to.
pub fn payload_len(payload: &HistoryPayload) -> usize {
    match payload {
        HistoryPayload::FlDiff { diff } => clen(diff),
        HistoryPayload::FnPair { before, after } => {
            before.as_ref().map_or(0, |s| clen(&s.body_text)) + after.as_ref().map_or(0, |s| clen(&s.body_text))
        }
        HistoryPayload::FnAll { files } => files.iter().map(fn_all_line_len).sum(),
    }
}

/// `path: a, b, c\n`
fn fn_all_line_len(f: &FileFunctions) -> usize {
    clen(&f.path) + 2 + f.names.iter().map(|n| clen(n)).sum::<usize>() + 2 * f.names.len().saturating_sub(1) + 1
}

pub fn truncate(mut ctx: HistoricalContext, budget: usize) -> HistoricalContext {
    assert!(budget > 0, "truncation budget must be positive");
    let cut = match &mut ctx.payload {
        HistoryPayload::FlDiff { diff } => cut_diff(diff, budget),
        HistoryPayload::FnPair { before, after } => {
            let side = (budget / 2).max(1);
            let a = before.as_mut().is_some_and(|s| cut_span(s, side));
            let b = after.as_mut().is_some_and(|s| cut_span(s, side));
            a || b
        }
        HistoryPayload::FnAll { files } => cut_fn_all(files, budget),
    };
    ctx.truncated |= cut;
    ctx
}

/// Keep whole diff units (file headers and hunks) in order until the next
/// one would overflow. The first file header is always kept, hard-cut at a
/// line boundary when it alone exceeds the budget.
fn cut_diff(diff: &mut String, budget: usize) -> bool {
    if clen(diff) <= budget {
        return false;
    }
    let mut units: Vec<&str> = Vec::new();
    let files = split_raw(diff);
    for f in &files {
        units.push(&f.header);
        units.extend(f.hunks.iter().map(String::as_str));
    }
    let mut kept = String::new();
    let mut used = 0;
    for (i, unit) in units.iter().enumerate() {
        let n = clen(unit);
        if used + n > budget {
            if i == 0 {
                kept = cut_lines(unit, budget);
            }
            break;
        }
        kept.push_str(unit);
        used += n;
    }
    *diff = kept;
    true
}

/// Longest prefix of whole lines within `budget` chars; falls back to a raw
/// character cut when even the first line is too long.
fn cut_lines(text: &str, budget: usize) -> String {
    let mut out = String::new();
    let mut used = 0;
    for line in text.split_inclusive('\n') {
        let n = clen(line);
        if used + n > budget {
            break;
        }
        out.push_str(line);
        used += n;
    }
    if out.is_empty() {
        out = text.chars().take(budget).collect();
    }
    out
}

fn cut_span(span: &mut FunctionSpan, budget: usize) -> bool {
    if clen(&span.body_text) <= budget {
        return false;
    }
    span.body_text = cut_lines(&span.body_text, budget);
    true
}

fn cut_fn_all(files: &mut Vec<FileFunctions>, budget: usize) -> bool {
    let total: usize = files.iter().map(fn_all_line_len).sum();
    if total <= budget {
        return false;
    }
    let mut used = 0;
    let mut keep_files = 0;
    for f in files.iter_mut() {
        let base = clen(&f.path) + 3;
        if used + base > budget {
            break;
        }
        let mut line = base;
        let mut keep = 0;
        for (j, name) in f.names.iter().enumerate() {
            let extra = clen(name) + if j == 0 { 0 } else { 2 };
            if used + line + extra > budget {
                break;
            }
            line += extra;
            keep += 1;
        }
        let all = keep == f.names.len();
        f.names.truncate(keep);
        used += line;
        keep_files += 1;
        if !all {
            break;
        }
    }
    files.truncate(keep_files);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{HeuristicKind, SpanSource};

    fn ctx(payload: HistoryPayload) -> HistoricalContext {
        HistoricalContext {
            kind: payload.kind(),
            commit_id: "c".into(),
            commit_message: "m".into(),
            payload,
            truncated: false,
            notice: None,
        }
    }

    fn diff_with_hunks(n: usize, body_lines: usize) -> String {
        let mut d = String::from("diff --git a/f.c b/f.c\nindex 1..2 100644\n--- a/f.c\n+++ b/f.c\n");
        for h in 0..n {
            d.push_str(&format!("@@ -{0},{1} +{0},{1} @@\n", h * 100 + 1, body_lines));
            for l in 0..body_lines {
                d.push_str(&format!(" context line {h}-{l}\n"));
            }
        }
        d
    }

    #[test]
    fn under_budget_is_untouched() {
        let d = diff_with_hunks(2, 3);
        let out = truncate(ctx(HistoryPayload::FlDiff { diff: d.clone() }), 10_000);
        assert!(!out.truncated);
        assert_eq!(out.payload, HistoryPayload::FlDiff { diff: d });
    }

    #[test]
    fn whole_hunks_until_overflow() {
        let d = diff_with_hunks(60, 10);
        assert!(d.len() > 9_000);
        // independent length arithmetic: header, then hunks of equal shape
        let files = split_raw(&d);
        let header = files[0].header.len();
        let mut expected = header;
        for h in &files[0].hunks {
            if expected + h.len() > 4_000 {
                break;
            }
            expected += h.len();
        }
        let out = truncate(ctx(HistoryPayload::FlDiff { diff: d.clone() }), 4_000);
        let HistoryPayload::FlDiff { diff } = &out.payload else { panic!() };
        assert!(out.truncated);
        assert_eq!(diff.len(), expected);
        assert!(d.starts_with(diff.as_str()));
    }

    #[test]
    fn tiny_budget_keeps_header_only() {
        let d = diff_with_hunks(1, 50);
        let header_len = split_raw(&d)[0].header.len();
        let out = truncate(ctx(HistoryPayload::FlDiff { diff: d }), header_len + 5);
        let HistoryPayload::FlDiff { diff } = &out.payload else { panic!() };
        assert_eq!(diff.len(), header_len);
        assert!(out.truncated);
    }

    #[test]
    fn idempotent_and_sticky() {
        let d = diff_with_hunks(30, 5);
        let once = truncate(ctx(HistoryPayload::FlDiff { diff: d }), 1_000);
        let twice = truncate(once.clone(), 1_000);
        assert_eq!(once, twice);
    }

    #[test]
    fn fn_pair_sides_get_half_each() {
        let body: String = (0..200).map(|i| format!("line {i}\n")).collect();
        let span = FunctionSpan {
            file_path: "f".into(),
            name: "f".into(),
            start_line: 1,
            end_line: 200,
            body_text: body,
            source: SpanSource::Detected,
        };
        let out = truncate(
            ctx(HistoryPayload::FnPair { before: Some(span.clone()), after: Some(span) }),
            400,
        );
        assert_eq!(out.kind, HeuristicKind::FnPair);
        let HistoryPayload::FnPair { before, after } = &out.payload else { panic!() };
        assert!(before.as_ref().unwrap().body_text.len() <= 200);
        assert!(after.as_ref().unwrap().body_text.ends_with('\n'));
        assert!(payload_len(&out.payload) <= 400);
    }

    #[test]
    fn fn_all_drops_trailing_names() {
        let files = vec![
            FileFunctions { path: "a.c".into(), names: (0..50).map(|i| format!("fn{i}")).collect(), warning: None },
            FileFunctions { path: "b.c".into(), names: vec!["x".into()], warning: None },
        ];
        let out = truncate(ctx(HistoryPayload::FnAll { files }), 60);
        let HistoryPayload::FnAll { files } = &out.payload else { panic!() };
        assert_eq!(files.len(), 1);
        assert!(files[0].names.len() < 50);
        assert!(payload_len(&out.payload) <= 60);
        assert_eq!(files[0].names[0], "fn0");
    }
}
