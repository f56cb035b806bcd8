use std::time::Duration;

use histrepair::manifest::Manifest;
use histrepair::sandbox::*;
use histrepair::testkit::{toy, toy_dataset};

fn provision() -> (tempfile::TempDir, SandboxHandle, String) {
    let dir = tempfile::tempdir().unwrap();
    let ds = toy_dataset(dir.path()).unwrap();
    let m = Manifest::load(&ds.manifest).unwrap();
    let spec = m.bug_spec(&m.entries[0]).unwrap();
    let sb = SandboxHandle::provision(&ds.repo, &spec, &ProjectAdapter::fixture(), &SandboxOptions::local()).unwrap();
    (dir, sb, ds.fix_patch)
}

#[test]
fn snapshot_fails_then_fix_passes() {
    let (_d, mut sb, fix) = provision();
    let (_, verdict) = sb.run_test(1).unwrap();
    let TestVerdict::Parsed(outcome) = verdict else { panic!("{verdict:?}") };
    assert_eq!(outcome.failing_tests, [toy::FAILING_TEST]);
    assert_eq!(sb.final_patch().unwrap(), "");

    let out = sb.exec(2, toy::FIX_SED, Duration::from_secs(30)).unwrap();
    assert!(out.result.success());
    assert!(out.test.is_none());
    let (_, verdict) = sb.run_test(3).unwrap();
    assert!(verdict.passed());
    assert_eq!(sb.final_patch().unwrap(), fix);
}

#[test]
fn test_invocation_is_detected_inside_compound_commands() {
    let (_d, mut sb, _) = provision();
    let out = sb.exec(1, &format!("echo before && {TEST_WRAPPER} | tail -n 3"), Duration::from_secs(30)).unwrap();
    assert!(matches!(out.test, Some(TestVerdict::Parsed(ref o)) if !o.all_passed));
    let out = sb.exec(2, COMPILE_WRAPPER, Duration::from_secs(30)).unwrap();
    assert!(out.result.success(), "{}", out.result.stderr);
    assert!(out.test.is_none());
}

#[test]
fn environment_is_scrubbed() {
    std::env::set_var("HISTREPAIR_LEAK_CHECK", "secret");
    let (_d, mut sb, _) = provision();
    let out = sb.exec(1, "env | cut -d= -f1 | sort", Duration::from_secs(10)).unwrap();
    let mut names: Vec<&str> = out.result.stdout.lines().filter(|n| !["PWD", "SHLVL", "_"].contains(n)).collect();
    names.sort_unstable();
    let mut allowed = ENV_ALLOWLIST.to_vec();
    allowed.sort_unstable();
    assert_eq!(names, allowed);
}

#[test]
fn untracked_files_appear_in_final_patch() {
    let (_d, mut sb, _) = provision();
    sb.exec(1, "printf 'note\\n' > NOTES.txt && mkdir -p build && touch build/ignored", Duration::from_secs(10)).unwrap();
    let patch = sb.final_patch().unwrap();
    assert!(patch.contains("+++ b/NOTES.txt"));
    assert!(!patch.contains("build/ignored"));
}

#[test]
fn timeout_kills_the_command() {
    let (_d, mut sb, _) = provision();
    let out = sb.exec(1, "sleep 20", Duration::from_millis(300)).unwrap();
    assert!(out.result.timed_out);
    assert_eq!(out.result.exit_code, 137);
    assert!(sb.is_alive());
}

#[test]
fn teardown_persists_then_destroys() {
    let (d, mut sb, _) = provision();
    sb.exec(1, toy::FIX_SED, Duration::from_secs(10)).unwrap();
    let worktree = sb.worktree_path().to_path_buf();
    let out = d.path().join("artifacts");
    let manifest = sb.teardown(&out).unwrap();
    assert!(std::fs::read_to_string(&manifest.patch).unwrap().contains("? hi"));
    assert!(std::fs::read_to_string(&manifest.command_log).unwrap().contains("=== step 1 ==="));
    assert!(!worktree.exists());
    assert!(!sb.is_alive());
    assert_eq!(sb.teardown(&out).unwrap(), manifest);
    assert!(matches!(sb.exec(2, "true", Duration::from_secs(1)), Err(SandboxError::SandboxDead)));
}

#[test]
fn unknown_snapshot_fails_provisioning() {
    let dir = tempfile::tempdir().unwrap();
    let ds = toy_dataset(dir.path()).unwrap();
    let m = Manifest::load(&ds.manifest).unwrap();
    let mut spec = m.bug_spec(&m.entries[0]).unwrap();
    spec.snapshot_ref = "0123456789abcdef0123456789abcdef01234567".into();
    let err = SandboxHandle::provision(&ds.repo, &spec, &ProjectAdapter::fixture(), &SandboxOptions::local()).unwrap_err();
    assert!(matches!(err, SandboxError::Provision(_)));
}
