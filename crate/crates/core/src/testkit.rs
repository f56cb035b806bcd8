//! Fixtures shared by tests, benches and the demo: a deterministic git repo
//! builder, the bundled toy C project, and scripted agent transcripts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::agent::{OnExhausted, ScriptFixture, ScriptedReply, TokenUsage, DEFAULT_SENTINEL};
use crate::git::{GitError, Repo};

#[cfg(feature = "testkit")]
pub mod synth;

/// Author time of the first fixture commit; each commit adds one hour.
pub const EPOCH: i64 = 1_700_000_000;

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error(transparent)]
    Git(#[from] GitError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Builds repositories with fixed identities and dates so hashes are stable.
#[derive(Debug)]
pub struct RepoBuilder {
    repo: Repo,
    commits: usize,
}

impl RepoBuilder {
    pub fn init(dir: impl Into<PathBuf>) -> Result<Self, FixtureError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let repo = Repo::open(&dir);
        repo.run(&["init", "--quiet"])?;
        repo.run(&["config", "commit.gpgsign", "false"])?;
        repo.run(&["config", "core.autocrlf", "false"])?;
        Ok(Self { repo, commits: 0 })
    }

    pub fn repo(&self) -> &Repo {
        &self.repo
    }

    pub fn path(&self) -> &Path {
        self.repo.path()
    }

    pub fn write(&self, path: &str, content: &str) -> Result<(), FixtureError> {
        let full = self.path().join(path);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(full, content)?;
        Ok(())
    }

    pub fn remove(&self, path: &str) -> Result<(), FixtureError> {
        fs::remove_file(self.path().join(path))?;
        Ok(())
    }

    /// Author time the next commit will get.
    pub fn next_time(&self) -> i64 {
        EPOCH + 3_600 * self.commits as i64
    }

    /// Stage everything and commit; returns the full hash.
    pub fn commit(&mut self, message: &str) -> Result<String, FixtureError> {
        let date = format!("{} +0000", self.next_time());
        let env = [
            ("GIT_AUTHOR_NAME", "Fixture"),
            ("GIT_AUTHOR_EMAIL", "fixture@example.com"),
            ("GIT_AUTHOR_DATE", date.as_str()),
            ("GIT_COMMITTER_NAME", "Fixture"),
            ("GIT_COMMITTER_EMAIL", "fixture@example.com"),
            ("GIT_COMMITTER_DATE", date.as_str()),
        ];
        self.repo.run(&["add", "-A"])?;
        self.repo.run_raw_env(&env, &["commit", "--quiet", "--allow-empty", "-m", message])?;
        self.commits += 1;
        Ok(self.repo.rev_parse("HEAD")?)
    }

    pub fn commit_files(&mut self, files: &[(&str, Option<&str>)], message: &str) -> Result<String, FixtureError> {
        for (path, content) in files {
            match content {
                Some(c) => self.write(path, c)?,
                None => self.remove(path)?,
            }
        }
        self.commit(message)
    }

    /// `git diff` of the worktree against HEAD after writing `files`.
    pub fn diff_against_head(&self, files: &[(&str, &str)]) -> Result<String, FixtureError> {
        worktree_diff(&self.repo, files)
    }
}

/// Write `files` into the worktree of `repo`, capture `git diff HEAD`, and
/// restore the worktree.
pub fn worktree_diff(repo: &Repo, files: &[(&str, &str)]) -> Result<String, FixtureError> {
    for (path, content) in files {
        let full = repo.path().join(path);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(full, content)?;
    }
    let diff = repo.run(&["diff", "--no-color", "--no-ext-diff", "HEAD"])?;
    repo.run(&["checkout", "--quiet", "--", "."])?;
    Ok(diff)
}

pub mod toy {
    //! A small C calculator whose `clamp` was broken by a refactoring commit.

    pub const BUG_ID: &str = "CALC-1";
    pub const FAILING_TEST: &str = "calc::test_clamp";
    pub const SOURCE: &str = "src/calc.c";
    /// Line of the buggy statement in the snapshot.
    pub const BUGGY_LINE: u32 = 14;

    pub const GITIGNORE: &str = "build/\n";

    pub const HEADER: &str = "\
#ifndef CALC_H
#define CALC_H

int add(int a, int b);
int clamp(int x, int lo, int hi);
int max3(int a, int b, int c);
int sum_to(int n);

#endif
";

    pub const CALC_V1: &str = "\
#include \"calc.h\"

int add(int a, int b)
{
    return a + b;
}

int clamp(int x, int lo, int hi)
{
    if (x < lo)
        return lo;
    if (x > hi)
        return hi;
    return x;
}

int sum_to(int n)
{
    int total = 0;
    for (int i = 1; i <= n; i++)
        total += i;
    return total;
}
";

    /// The refactoring commit: `clamp` collapses into one expression (with
    /// the wrong upper branch) and `max3` is added.
    pub const CALC_V2: &str = "\
#include \"calc.h\"

int add(int a, int b)
{
    return a + b;
}

int clamp(int x, int lo, int hi)
{
    if (lo > hi)
        return lo;
    /* single expression keeps the branch predictable */
    return x < lo ? lo
         : x > hi ? lo
         : x;
}

int max3(int a, int b, int c)
{
    int m = a > b ? a : b;
    return m > c ? m : c;
}

int sum_to(int n)
{
    int total = 0;
    for (int i = 1; i <= n; i++)
        total += i;
    return total;
}
";

    pub const CALC_FIXED: &str = "\
#include \"calc.h\"

int add(int a, int b)
{
    return a + b;
}

int clamp(int x, int lo, int hi)
{
    if (lo > hi)
        return lo;
    /* single expression keeps the branch predictable */
    return x < lo ? lo
         : x > hi ? hi
         : x;
}

int max3(int a, int b, int c)
{
    int m = a > b ? a : b;
    return m > c ? m : c;
}

int sum_to(int n)
{
    int total = 0;
    for (int i = 1; i <= n; i++)
        total += i;
    return total;
}
";

    pub const TESTS: &str = "\
#include <stdio.h>
#include \"../src/calc.h\"

static const char *failed[8];
static int n_failed = 0;

#define CHECK(name, cond) do { if (!(cond)) failed[n_failed++] = (name); } while (0)

int main(void)
{
    CHECK(\"calc::test_add\", add(2, 3) == 5);
    CHECK(\"calc::test_clamp\", clamp(5, 0, 3) == 3 && clamp(-1, 0, 3) == 0 && clamp(2, 0, 3) == 2);
    CHECK(\"calc::test_max3\", max3(1, 7, 4) == 7);
    CHECK(\"calc::test_sum_to\", sum_to(4) == 10);
    printf(\"Failing tests: %d\\n\", n_failed);
    for (int i = 0; i < n_failed; i++)
        printf(\"  - %s\\n\", failed[i]);
    return n_failed ? 1 : 0;
}
";

    pub const BUILD_SH: &str = "\
#!/bin/sh
set -e
mkdir -p build
cc -std=c99 -Wall -o build/test_calc src/calc.c tests/test_calc.c
";

    pub const RUN_TESTS_SH: &str = "\
#!/bin/sh
sh ./build.sh || exit 2
./build/test_calc
";

    pub const README: &str = "# calc\n\nTiny integer helpers.\n";

    pub const REPORT: &str = "\
clamp() returns the lower bound for values above the upper bound.

    clamp(5, 0, 3) == 0, expected 3

Seen since the clamp simplification.
";

    pub const FIX_SED: &str = "sed -i 's/: x > hi ? lo/: x > hi ? hi/' src/calc.c";
}

/// The toy project laid out as a dataset: a git repo, a bug report, the
/// developer fix patch and a one-bug manifest.
#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub repo: Repo,
    /// Commit that introduced the bug (the blame target).
    pub bug_commit: String,
    pub snapshot: String,
    pub fix_patch: String,
}

/// Build the toy dataset under `root` (which must not contain a repo yet).
pub fn toy_dataset(root: &Path) -> Result<ToyDataset, FixtureError> {
    use toy::*;
    let mut b = RepoBuilder::init(root.join("repos/calc"))?;
    b.commit_files(
        &[
            (".gitignore", Some(GITIGNORE)),
            ("src/calc.h", Some(HEADER)),
            (SOURCE, Some(CALC_V1)),
            ("tests/test_calc.c", Some(TESTS)),
            ("build.sh", Some(BUILD_SH)),
            ("run_tests.sh", Some(RUN_TESTS_SH)),
        ],
        "Add calculator library",
    )?;
    let bug_commit = b.commit_files(&[(SOURCE, Some(CALC_V2))], "Simplify clamp and add max3")?;
    let snapshot = b.commit_files(&[("README.md", Some(README))], "Add README")?;
    let fix_patch = b.diff_against_head(&[(SOURCE, CALC_FIXED)])?;

    fs::create_dir_all(root.join("reports"))?;
    fs::create_dir_all(root.join("patches"))?;
    fs::write(root.join("reports").join(format!("{BUG_ID}.md")), REPORT)?;
    fs::write(root.join("patches").join(format!("{BUG_ID}.diff")), &fix_patch)?;
    let entry = serde_json::json!({
        "id": BUG_ID,
        "repo": "repos/calc",
        "snapshot_ref": snapshot,
        "failing_tests": [FAILING_TEST],
        "report_path": format!("reports/{BUG_ID}.md"),
        "fix_patch_path": format!("patches/{BUG_ID}.diff"),
        "adapter": "fixture",
    });
    let manifest = root.join("manifest.jsonl");
    fs::write(&manifest, format!("{entry}\n"))?;
    Ok(ToyDataset { root: root.to_path_buf(), manifest, repo: b.repo().clone(), bug_commit, snapshot, fix_patch })
}

/// Bug ids of [`four_category_dataset`], one per category in
/// `BugCategory::ALL` order.
pub const FOUR_CATEGORY_BUGS: [&str; 4] = ["CALC-1", "CALC-SH", "CALC-SFMH", "CALC-MFMH"];

/// The toy dataset plus three more bugs on the same snapshot whose fix
/// patches span one contiguous block, two blocks in one file, and two files.
pub fn four_category_dataset(root: &Path) -> Result<ToyDataset, FixtureError> {
    use toy::*;
    let ds = toy_dataset(root)?;
    let hunk = CALC_FIXED.replace("    return x < lo ? lo\n", "    return x <= lo ? lo\n");
    let two_hunks = CALC_FIXED.replace("    return a + b;", "    return b + a;");
    let header = HEADER.replace("int add(int a, int b);", "int add(int lhs, int rhs);");
    let patches = [
        (FOUR_CATEGORY_BUGS[1], worktree_diff(&ds.repo, &[(SOURCE, &hunk)])?),
        (FOUR_CATEGORY_BUGS[2], worktree_diff(&ds.repo, &[(SOURCE, &two_hunks)])?),
        (FOUR_CATEGORY_BUGS[3], worktree_diff(&ds.repo, &[(SOURCE, CALC_FIXED), ("src/calc.h", &header)])?),
    ];
    let mut manifest = fs::read_to_string(&ds.manifest)?;
    for (id, patch) in patches {
        fs::write(root.join("reports").join(format!("{id}.md")), REPORT)?;
        fs::write(root.join("patches").join(format!("{id}.diff")), patch)?;
        let entry = serde_json::json!({
            "id": id,
            "repo": "repos/calc",
            "snapshot_ref": ds.snapshot,
            "failing_tests": [FAILING_TEST],
            "report_path": format!("reports/{id}.md"),
            "fix_patch_path": format!("patches/{id}.diff"),
        });
        manifest.push_str(&format!("{entry}\n"));
    }
    fs::write(&ds.manifest, manifest)?;
    Ok(ds)
}

pub mod scripts {
    //! Scripted agent transcripts for the toy project.

    use super::*;

    /// Usage attached to every scripted reply.
    pub const USAGE: TokenUsage = TokenUsage { input_tokens: 1_000, output_tokens: 100 };

    fn bash(thought: &str, command: &str) -> ScriptedReply {
        ScriptedReply::text(format!("{thought}\n\n```bash\n{command}\n```\n"), USAGE)
    }

    /// Inspect, reproduce, fix, verify, signal: five steps.
    pub fn happy_path() -> ScriptFixture {
        ScriptFixture {
            model: "scripted".into(),
            on_exhausted: OnExhausted::Error,
            replies: vec![
                bash("Look at the implementation first.", "cat src/calc.c"),
                bash("Reproduce the failure.", crate::sandbox::TEST_WRAPPER),
                bash("The upper branch returns `lo`; it should return `hi`.", toy::FIX_SED),
                bash("Verify the fix.", crate::sandbox::TEST_WRAPPER),
                bash("All tests pass.", &format!("echo {DEFAULT_SENTINEL}")),
            ],
        }
    }

    pub const HAPPY_PATH_STEPS: u32 = 5;

    /// Looks around forever without touching anything.
    pub fn never_fixing() -> ScriptFixture {
        ScriptFixture {
            model: "scripted".into(),
            on_exhausted: OnExhausted::RepeatLast,
            replies: vec![bash("Keep looking.", "ls src")],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_hashes_are_stable() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let h: Vec<String> = [a.path(), b.path()]
            .iter()
            .map(|d| {
                let mut rb = RepoBuilder::init(*d).unwrap();
                rb.commit_files(&[("f.txt", Some("one\n"))], "first").unwrap()
            })
            .collect();
        assert_eq!(h[0], h[1]);
    }

    #[test]
    fn toy_dataset_shape() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset(dir.path()).unwrap();
        let snap = ds.repo.show_file(&ds.snapshot, toy::SOURCE).unwrap().unwrap();
        assert_eq!(snap, toy::CALC_V2);
        let line = snap.lines().nth(toy::BUGGY_LINE as usize - 1).unwrap();
        assert!(line.contains("x > hi ? lo"));
        assert!(ds.fix_patch.contains("-         : x > hi ? lo"));
        assert!(ds.fix_patch.contains("+         : x > hi ? hi"));
    }
}
