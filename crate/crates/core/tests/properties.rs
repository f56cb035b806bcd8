use histrepair::agent::{parse_action, Termination};
use histrepair::context::*;
use histrepair::eval::*;
use histrepair::history::{most_frequent_commit, BlameEntry, BugCategory};
use proptest::prelude::*;
use rust_decimal::Decimal;

fn diff_text() -> impl Strategy<Value = String> {
    let hunk = prop::collection::vec(("[ +-]", "[a-z ]{0,30}"), 1..12);
    let file = ("[a-z]{1,8}", prop::collection::vec(hunk, 1..4));
    prop::collection::vec(file, 1..4).prop_map(|files| {
        let mut out = String::new();
        for (name, hunks) in files {
            out.push_str(&format!("diff --git a/{name}.c b/{name}.c\n--- a/{name}.c\n+++ b/{name}.c\n"));
            for (i, lines) in hunks.iter().enumerate() {
                let old = lines.iter().filter(|(p, _)| p != "+").count();
                let new = lines.iter().filter(|(p, _)| p != "-").count();
                out.push_str(&format!("@@ -{},{old} +{},{new} @@\n", 1 + 40 * i, 1 + 40 * i));
                for (p, text) in lines {
                    out.push_str(&format!("{p}{text}\n"));
                }
            }
        }
        out
    })
}

fn ctx(payload: HistoryPayload) -> HistoricalContext {
    HistoricalContext {
        kind: payload.kind(),
        commit_id: "abc".into(),
        commit_message: "msg".into(),
        payload,
        truncated: false,
        notice: None,
    }
}

fn row(bug: usize, config: HeuristicKind, passed: bool, cost: i64) -> OutcomeRow {
    OutcomeRow {
        bug_id: format!("b{bug}"),
        category: BugCategory::SH,
        config,
        passed,
        steps: 1,
        cost: Decimal::new(cost, 3),
        termination: if passed { Termination::CompletedSignal } else { Termination::StepLimit },
    }
}

proptest! {
    #[test]
    fn fl_diff_truncation_is_bounded_and_idempotent(diff in diff_text(), budget in 1usize..1500) {
        let full = ctx(HistoryPayload::FlDiff { diff: diff.clone() });
        let once = truncate(full.clone(), budget);
        prop_assert!(payload_len(&once.payload) <= budget);
        prop_assert_eq!(truncate(once.clone(), budget), once.clone());
        if diff.chars().count() <= budget {
            prop_assert_eq!(once, full);
        } else {
            prop_assert!(once.truncated);
            let HistoryPayload::FlDiff { diff: kept } = &once.payload else { unreachable!() };
            prop_assert!(diff.starts_with(kept.as_str()));
        }
    }

    #[test]
    fn fn_all_truncation_keeps_whole_names(
        names in prop::collection::vec(prop::collection::vec("[a-z_]{1,12}", 1..20), 1..4),
        budget in 1usize..400,
    ) {
        let files: Vec<FileFunctions> = names
            .into_iter()
            .enumerate()
            .map(|(i, names)| FileFunctions { path: format!("src/f{i}.c"), names, warning: None })
            .collect();
        let once = truncate(ctx(HistoryPayload::FnAll { files: files.clone() }), budget);
        prop_assert!(payload_len(&once.payload) <= budget);
        prop_assert_eq!(truncate(once.clone(), budget), once.clone());
        let HistoryPayload::FnAll { files: kept } = &once.payload else { unreachable!() };
        for k in kept {
            let orig = files.iter().find(|f| f.path == k.path).unwrap();
            prop_assert!(orig.names.starts_with(&k.names));
        }
    }

    #[test]
    fn friedman_is_rank_invariant(rows in prop::collection::vec(prop::collection::vec(0u8..8, 4), 2..25)) {
        let m: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let warped: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| (v / 2.0).exp() * 3.0 - 7.0).collect()).collect();
        let a = friedman(&m).unwrap();
        let b = friedman(&warped).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn wilcoxon_is_sign_symmetric(diffs in prop::collection::vec(-6i32..=6, 1..30)) {
        let d: Vec<f64> = diffs.iter().map(|&x| x as f64).collect();
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        match (wilcoxon_from_differences(&d, BONFERRONI_ALPHA), wilcoxon_from_differences(&neg, BONFERRONI_ALPHA)) {
            (Ok(a), Ok(b)) => {
                prop_assert!(a.p_value > 0.0 && a.p_value <= 1.0);
                prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
                prop_assert_eq!(a.statistic, b.statistic);
            }
            (Err(EvalError::DegenerateAllZero), Err(EvalError::DegenerateAllZero)) => {
                prop_assert!(diffs.iter().all(|&x| x == 0));
            }
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn overlap_regions_conserve_the_union(pass in prop::collection::vec(prop::array::uniform4(any::<bool>()), 1..40)) {
        let rows: Vec<OutcomeRow> = pass
            .iter()
            .enumerate()
            .flat_map(|(b, p)| HeuristicKind::ALL.into_iter().zip(p).map(move |(k, &ok)| row(b, k, ok, 1)))
            .collect();
        let ov = overlap_regions(&rows).unwrap();
        prop_assert_eq!(ov.regions.values().sum::<usize>(), ov.union);
        prop_assert_eq!(ov.union, pass.iter().filter(|p| p.iter().any(|&x| x)).count());
        for (j, kind) in HeuristicKind::ALL.into_iter().enumerate().skip(1) {
            let mine: Vec<OutcomeRow> = rows.iter().filter(|r| r.config == kind).cloned().collect();
            let base: Vec<OutcomeRow> = rows.iter().filter(|r| r.config == HeuristicKind::NonHistory).cloned().collect();
            let from_regions: usize =
                (1u8..16).filter(|m| m & (1 << j) != 0 && m & 1 == 0).map(|m| ov.regions[&subset_label(m)]).sum();
            prop_assert_eq!(unique_pass(&mine, &base).unwrap(), from_regions);
        }
    }

    #[test]
    fn parse_action_returns_the_trimmed_block(prose in "[A-Za-z .,]{0,60}", cmd in "[a-z][a-z0-9 ./|&-]{0,40}") {
        let text = format!("{prose}\n\n```bash\n  {cmd}  \n```\n");
        let a = parse_action(&text).unwrap();
        prop_assert_eq!(a.command, cmd.trim());
    }

    #[test]
    fn majority_vote_ignores_order(picks in prop::collection::vec(0usize..4, 1..12), seed in any::<u64>()) {
        let entry = |c: usize| BlameEntry {
            file_path: "f".into(),
            line_number: 1,
            commit_id: format!("c{c}"),
            author_time: 100 * c as i64,
            is_fallback: true,
            orig_path: "f".into(),
            orig_line: 1,
            insertion_line: None,
            fallback_window: None,
        };
        let entries: Vec<BlameEntry> = picks.iter().map(|&c| entry(c)).collect();
        let mut shuffled = entries.clone();
        let n = shuffled.len();
        shuffled.rotate_left(seed as usize % n);
        shuffled.reverse();
        prop_assert_eq!(most_frequent_commit(&entries), most_frequent_commit(&shuffled));
    }
}
