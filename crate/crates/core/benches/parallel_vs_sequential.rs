//! Sequential versus rayon execution of the data-parallel stages: the blame
//! availability study over synthetic repositories, and evaluation of a large
//! outcome table.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use histrepair::agent::Termination;
use histrepair::context::HeuristicKind;
use histrepair::diff::FixPatch;
use histrepair::eval::{evaluate, tradeoff_frontier, OutcomeRow};
use histrepair::history::{availability_report, locations_from_patch, BugCategory, BugSpec, FirstCandidateJudge, StudyItem};
use histrepair::par::ExecMode;
use histrepair::testkit::synth::{self, SynthParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn study_items(dir: &std::path::Path, repos: usize) -> Vec<StudyItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut items = Vec::new();
    for r in 0..repos {
        let s = synth::generate(&dir.join(format!("r{r}")), &mut rng, SynthParams::default()).unwrap();
        for b in 0..4 {
            let fi = rng.gen_range(0..s.files.len());
            let line = rng.gen_range(1..=s.files[fi].lines.len() as u32);
            let patch = FixPatch::parse(&s.patch_modifying(fi, &[line]).unwrap()).unwrap();
            let spec = BugSpec {
                bug_id: format!("r{r}-{b}"),
                snapshot_ref: s.snapshot().to_string(),
                locations: locations_from_patch(&patch),
                failing_tests: Vec::new(),
                bug_report: String::new(),
            };
            items.push(StudyItem { spec, patch, repo: s.repo.clone() });
        }
    }
    items
}

fn outcome_rows(bugs: usize) -> Vec<OutcomeRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut rows = Vec::with_capacity(bugs * 4);
    for b in 0..bugs {
        let category = BugCategory::ALL[b % 4];
        for config in HeuristicKind::ALL {
            let passed = rng.gen_bool(0.6);
            rows.push(OutcomeRow {
                bug_id: format!("bug{b}"),
                category,
                config,
                passed,
                steps: rng.gen_range(3..=50),
                cost: Decimal::new(rng.gen_range(100..=100_000), 6),
                termination: if passed { Termination::CompletedSignal } else { Termination::StepLimit },
            });
        }
    }
    rows
}

fn bench_study(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let items = study_items(dir.path(), 12);
    let mut g = c.benchmark_group("availability_report");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::new(name, items.len()), &items, |b, items| {
            b.iter(|| availability_report(items, &FirstCandidateJudge, mode))
        });
    }
    g.finish();
}

fn bench_eval(c: &mut Criterion) {
    let rows = outcome_rows(854);
    let mut g = c.benchmark_group("evaluate");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::new(name, rows.len()), &rows, |b, rows| b.iter(|| evaluate(rows, mode).unwrap()));
    }
    g.finish();
    let mut g = c.benchmark_group("tradeoff_frontier");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::new(name, rows.len()), &rows, |b, rows| {
            b.iter(|| tradeoff_frontier(rows, mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_study, bench_eval);
criterion_main!(benches);
