use std::time::Duration;

use histrepair::agent::*;
use histrepair::context::{render_prompts, PromptBundle, PromptVars, TemplateSet};
use histrepair::history::BugSpec;
use histrepair::manifest::Manifest;
use histrepair::sandbox::{ProjectAdapter, SandboxHandle, SandboxOptions, COMPILE_WRAPPER, TEST_WRAPPER};
use histrepair::testkit::{scripts, toy_dataset, ToyDataset};
use rust_decimal::Decimal;

struct Fixture {
    _dir: tempfile::TempDir,
    ds: ToyDataset,
    spec: BugSpec,
    bundle: PromptBundle,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let ds = toy_dataset(dir.path()).unwrap();
    let manifest = Manifest::load(&ds.manifest).unwrap();
    let spec = manifest.bug_spec(&manifest.entries[0]).unwrap();
    let vars = PromptVars::standard("/work", COMPILE_WRAPPER, TEST_WRAPPER, DEFAULT_SENTINEL);
    let bundle = render_prompts(&spec, None, &TemplateSet::default(), &vars).unwrap();
    Fixture { _dir: dir, ds, spec, bundle }
}

fn pricing(input: &str, output: &str) -> PricingTable {
    PricingTable::default().with("scripted", input.parse().unwrap(), output.parse().unwrap())
}

fn run_script(f: &Fixture, script: ScriptFixture, config: &LoopConfig) -> RunRecord {
    let mut sandbox =
        SandboxHandle::provision(&f.ds.repo, &f.spec, &ProjectAdapter::fixture(), &SandboxOptions::local()).unwrap();
    let mut provider = ScriptedProvider::new(script);
    run(&f.spec, &f.bundle, &mut sandbox, &mut provider, config, &TickClock::new(Duration::from_millis(10)))
}

fn config() -> LoopConfig {
    LoopConfig { pricing: pricing("1", "2"), retry: RetryPolicy::immediate(), ..LoopConfig::default() }
}

#[test]
fn happy_path_completes_in_scripted_steps() {
    let f = fixture();
    let rec = run_script(&f, scripts::happy_path(), &config());
    assert_eq!(rec.termination, Termination::CompletedSignal, "{:?}", rec.termination_detail);
    assert_eq!(rec.steps_taken, scripts::HAPPY_PATH_STEPS);
    assert!(rec.tests_passed_at_end);
    let patch = rec.final_patch.as_deref().unwrap();
    assert!(patch.contains("+         : x > hi ? hi"), "{patch}");
    // 5 replies x (1000 in at $1/M + 100 out at $2/M) = 5 x 0.0012
    assert_eq!(rec.total_cost, "0.006".parse::<Decimal>().unwrap());
}

#[test]
fn never_fixing_hits_step_limit() {
    let f = fixture();
    let rec = run_script(&f, scripts::never_fixing(), &config());
    assert_eq!(rec.termination, Termination::StepLimit);
    assert_eq!(rec.steps_taken, 50);
    assert!(!rec.tests_passed_at_end);
    assert_eq!(rec.final_patch.as_deref(), Some(""));
}

#[test]
fn cost_limit_trips_exactly_at_cap() {
    let f = fixture();
    // Each reply costs 1000 * 150 / 1e6 + 100 * 1000 / 1e6 = 0.25.
    let mut cfg = config();
    cfg.pricing = pricing("150", "1000");
    let rec = run_script(&f, scripts::never_fixing(), &cfg);
    assert_eq!(rec.termination, Termination::CostLimit);
    assert_eq!(rec.total_cost, Decimal::ONE);
    assert_eq!(rec.steps_taken, 4);
}

#[test]
fn replay_is_byte_identical() {
    let f = fixture();
    let a = run_script(&f, scripts::happy_path(), &config()).without_wall_clock().to_jsonl();
    let b = run_script(&f, scripts::happy_path(), &config()).without_wall_clock().to_jsonl();
    assert_eq!(a, b);
}
