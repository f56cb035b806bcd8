use std::process::Command;

use histrepair::context::*;
use histrepair::history::*;
use histrepair::manifest::{Manifest, ManifestError};
use histrepair::par::ExecMode;
use histrepair::testkit::{four_category_dataset, toy, toy_dataset, ToyDataset, FOUR_CATEGORY_BUGS};

fn dataset() -> (tempfile::TempDir, ToyDataset, Manifest) {
    let dir = tempfile::tempdir().unwrap();
    let ds = toy_dataset(dir.path()).unwrap();
    let m = Manifest::load(&ds.manifest).unwrap();
    (dir, ds, m)
}

fn summary(ds: &ToyDataset, m: &Manifest) -> BlameSummary {
    let spec = m.bug_spec(&m.entries[0]).unwrap();
    summarize_blame(&Snapshot::new(ds.repo.clone(), &ds.snapshot), &spec, &FirstCandidateJudge).unwrap()
}

fn lines(text: &str, start: usize, end: usize) -> String {
    text.split_inclusive('\n').skip(start - 1).take(end - start + 1).collect()
}

#[test]
fn manifest_derives_locations_and_category() {
    let (_d, _ds, m) = dataset();
    let e = &m.entries[0];
    let spec = m.bug_spec(e).unwrap();
    assert_eq!(spec.locations.len(), 1);
    assert_eq!(spec.locations[0].file_path, toy::SOURCE);
    assert_eq!(spec.locations[0].lines, vec![FaultLine { line: toy::BUGGY_LINE, kind: EditKind::Modified }]);
    assert_eq!(m.category(e).unwrap(), BugCategory::SL);
    assert!(matches!(m.find("nope"), Err(ManifestError::NotFound(_))));
}

#[test]
fn four_category_fixture_covers_every_category() {
    let dir = tempfile::tempdir().unwrap();
    let ds = four_category_dataset(dir.path()).unwrap();
    let m = Manifest::load(&ds.manifest).unwrap();
    let ids: Vec<&str> = m.entries.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids, FOUR_CATEGORY_BUGS);
    let cats: Vec<BugCategory> = m.entries.iter().map(|e| m.category(e).unwrap()).collect();
    assert_eq!(cats, BugCategory::ALL);
    let (items, excluded) = m.study_items();
    assert!(excluded.is_empty());
    let report = availability_report(&items, &FirstCandidateJudge, ExecMode::Sequential);
    assert!(report.rows.iter().all(|r| r.blameability == Blameability::Blameable));
}

#[test]
fn manifest_rejects_empty_and_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.jsonl");
    std::fs::write(&p, "# nothing here\n\n").unwrap();
    assert!(matches!(Manifest::load(&p), Err(ManifestError::Empty(_))));
    let line = r#"{"id":"a","repo":"r","snapshot_ref":"HEAD","report_path":"x"}"#;
    std::fs::write(&p, format!("{line}\n{line}\n")).unwrap();
    assert!(matches!(Manifest::load(&p), Err(ManifestError::Duplicate(id)) if id == "a"));
    std::fs::write(&p, "{not json\n").unwrap();
    assert!(matches!(Manifest::load(&p), Err(ManifestError::Parse { line: 1, .. })));
}

#[test]
fn blame_resolves_the_refactoring_commit() {
    let (_d, ds, m) = dataset();
    let s = summary(&ds, &m);
    assert_eq!(s.blameability, Blameability::Blameable);
    assert_eq!(s.resolution_method, ResolutionMethod::Single);
    assert_eq!(s.resolved_commit, ds.bug_commit);
    assert_eq!(s.entries[0].orig_line, toy::BUGGY_LINE);
}

#[test]
fn study_over_toy_manifest() {
    let (_d, _ds, m) = dataset();
    let (items, excluded) = m.study_items();
    assert!(excluded.is_empty());
    let report = availability_report(&items, &FirstCandidateJudge, ExecMode::Sequential);
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].category, BugCategory::SL);
    assert_eq!(report.rows[0].unique_commits, 1);
}

#[test]
fn fn_all_lists_functions_of_changed_files() {
    let (_d, ds, m) = dataset();
    let s = summary(&ds, &m);
    let ctx = build_context(&ds.repo, &s, HeuristicKind::FnAll, &CFamilyDetector, &Budgets::default()).unwrap().unwrap();
    let HistoryPayload::FnAll { files } = ctx.payload else { panic!() };
    assert_eq!(files.len(), 1);
    assert_eq!(files[0].path, toy::SOURCE);
    assert_eq!(files[0].names, ["add", "clamp", "max3", "sum_to"]);
}

#[test]
fn fn_pair_spans_are_byte_exact() {
    let (_d, ds, m) = dataset();
    let s = summary(&ds, &m);
    let ctx = build_context(&ds.repo, &s, HeuristicKind::FnPair, &CFamilyDetector, &Budgets::default()).unwrap().unwrap();
    let HistoryPayload::FnPair { before, after } = ctx.payload else { panic!() };
    let (before, after) = (before.unwrap(), after.unwrap());
    assert_eq!(before.name, "clamp");
    assert_eq!((before.start_line, before.end_line), (8, 15));
    assert_eq!(before.body_text, lines(toy::CALC_V1, 8, 15));
    assert_eq!((after.start_line, after.end_line), (8, 16));
    assert_eq!(after.body_text, lines(toy::CALC_V2, 8, 16));
}

#[test]
fn fl_diff_round_trips_through_patch() {
    let (dir, ds, m) = dataset();
    let s = summary(&ds, &m);
    let ctx = build_context(&ds.repo, &s, HeuristicKind::FlDiff, &CFamilyDetector, &Budgets::default()).unwrap().unwrap();
    let HistoryPayload::FlDiff { diff } = &ctx.payload else { panic!() };
    assert!(!ctx.truncated);
    let work = dir.path().join("apply");
    std::fs::create_dir_all(work.join("src")).unwrap();
    std::fs::write(work.join(toy::SOURCE), toy::CALC_V1).unwrap();
    std::fs::write(work.join("fl.diff"), diff).unwrap();
    let st = Command::new("patch").args(["-s", "-p1", "-i", "fl.diff"]).current_dir(&work).status().unwrap();
    assert!(st.success());
    assert_eq!(std::fs::read_to_string(work.join(toy::SOURCE)).unwrap(), toy::CALC_V2);
}

#[test]
fn prompts_embed_history_only_when_present() {
    let (_d, ds, m) = dataset();
    let spec = m.bug_spec(&m.entries[0]).unwrap();
    let s = summary(&ds, &m);
    let vars = PromptVars::standard("/workspace", "compile", "run-tests", "DONE");
    let plain = render_prompts(&spec, None, &TemplateSet::default(), &vars).unwrap();
    assert_eq!(plain.config, HeuristicKind::NonHistory);
    assert!(!plain.user_prompt.contains("# Historical Context"));
    assert!(!plain.system_prompt.contains("Historical Context"));
    assert!(plain.user_prompt.contains(toy::FAILING_TEST));

    let ctx = build_context(&ds.repo, &s, HeuristicKind::FlDiff, &CFamilyDetector, &Budgets::default()).unwrap();
    let with = render_prompts(&spec, ctx.as_ref(), &TemplateSet::default(), &vars).unwrap();
    assert_eq!(with.config, HeuristicKind::FlDiff);
    let HistoryPayload::FlDiff { diff } = &ctx.unwrap().payload else { panic!() };
    assert!(with.user_prompt.contains(diff.trim_end()));
    assert!(with.system_prompt.contains("Historical Context"));
    assert!(with.token_estimate > plain.token_estimate);

    let mut missing = vars.clone();
    missing.unset("sentinel");
    let err = render_prompts(&spec, None, &TemplateSet::default(), &missing).unwrap_err();
    assert_eq!(err.placeholder(), Some("sentinel"));
}

#[test]
fn small_budget_truncates_and_notices() {
    let (_d, ds, m) = dataset();
    let s = summary(&ds, &m);
    let budgets = Budgets { fl_diff: 200, ..Budgets::default() };
    let ctx = build_context(&ds.repo, &s, HeuristicKind::FlDiff, &CFamilyDetector, &budgets).unwrap().unwrap();
    assert!(ctx.truncated);
    assert!(payload_len(&ctx.payload) <= 200);
    assert!(render_history(&ctx).contains(TRUNCATION_NOTICE));
    assert_eq!(truncate(ctx.clone(), 200), ctx);
}
