//! Thin wrapper over the `git` command-line tool.
//!
//! Every call is read-only with respect to the working tree: blame, show and
//! diff are all evaluated against explicit revisions, so concurrent readers
//! of one repository never interfere.

use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use thiserror::Error;

/// Hash of the empty tree in SHA-1 repositories.
pub const EMPTY_TREE: &str = "4b825dc642cb6eb9a060e54bf8d69288fbee4904";

#[derive(Debug, Error)]
pub enum GitError {
    #[error("failed to spawn git: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("git {args} failed: {stderr}")]
    Failed { args: String, stderr: String },
    #[error("git output is not valid UTF-8")]
    Utf8,
}

/// A repository on disk, addressed through the git CLI.
#[derive(Debug, Clone)]
pub struct Repo {
    path: PathBuf,
}

/// Change status of one path in a commit's first-parent diff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeStatus {
    Added,
    Modified,
    Deleted,
    TypeChanged,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangedFile {
    pub path: String,
    pub status: ChangeStatus,
}

impl Repo {
    pub fn open(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new("git");
        cmd.current_dir(&self.path)
            .env("GIT_TERMINAL_PROMPT", "0")
            .env("LC_ALL", "C")
            .stdin(Stdio::null());
        cmd
    }

    pub fn run_raw(&self, args: &[&str]) -> Result<Output, GitError> {
        self.run_raw_env(&[], args)
    }

    /// Like `run_raw`, with extra environment variables (e.g. a private
    /// `GIT_INDEX_FILE`).
    pub fn run_raw_env(&self, env: &[(&str, &str)], args: &[&str]) -> Result<Output, GitError> {
        let out = self.command().envs(env.iter().copied()).args(args).output()?;
        if !out.status.success() {
            return Err(GitError::Failed {
                args: args.join(" "),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(out)
    }

    pub fn run(&self, args: &[&str]) -> Result<String, GitError> {
        let out = self.run_raw(args)?;
        String::from_utf8(out.stdout).map_err(|_| GitError::Utf8)
    }

    pub fn rev_parse(&self, rev: &str) -> Result<String, GitError> {
        let spec = format!("{rev}^{{commit}}");
        Ok(self.run(&["rev-parse", "--verify", "--quiet", &spec])?.trim().to_string())
    }

    pub fn tree_of(&self, rev: &str) -> Result<String, GitError> {
        let spec = format!("{rev}^{{tree}}");
        Ok(self.run(&["rev-parse", &spec])?.trim().to_string())
    }

    /// Raw bytes of `path` at `rev`, or `None` when the path is absent there.
    pub fn show_bytes(&self, rev: &str, path: &str) -> Result<Option<Vec<u8>>, GitError> {
        let spec = format!("{rev}:{path}");
        let probe = self.command().args(["cat-file", "-e", &spec]).output()?;
        if !probe.status.success() {
            return Ok(None);
        }
        Ok(Some(self.run_raw(&["cat-file", "blob", &spec])?.stdout))
    }

    pub fn show_file(&self, rev: &str, path: &str) -> Result<Option<String>, GitError> {
        match self.show_bytes(rev, path)? {
            None => Ok(None),
            Some(bytes) => String::from_utf8(bytes).map(Some).map_err(|_| GitError::Utf8),
        }
    }

    pub fn parents(&self, rev: &str) -> Result<Vec<String>, GitError> {
        let out = self.run(&["rev-list", "--parents", "-n", "1", rev])?;
        Ok(out.split_whitespace().skip(1).map(str::to_string).collect())
    }

    pub fn first_parent(&self, rev: &str) -> Result<Option<String>, GitError> {
        Ok(self.parents(rev)?.into_iter().next())
    }

    /// Full commit message.
    pub fn message(&self, rev: &str) -> Result<String, GitError> {
        Ok(self.run(&["log", "-1", "--format=%B", rev])?.trim_end().to_string())
    }

    pub fn subject(&self, rev: &str) -> Result<String, GitError> {
        Ok(self.run(&["log", "-1", "--format=%s", rev])?.trim_end().to_string())
    }

    pub fn author_time(&self, rev: &str) -> Result<i64, GitError> {
        let out = self.run(&["log", "-1", "--format=%at", rev])?;
        Ok(out.trim().parse().unwrap_or(0))
    }

    pub fn is_ancestor(&self, ancestor: &str, descendant: &str) -> Result<bool, GitError> {
        let status = self
            .command()
            .args(["merge-base", "--is-ancestor", ancestor, descendant])
            .status()?;
        Ok(status.success())
    }

    /// Files changed by `rev` relative to its first parent (or the empty tree
    /// for a root commit), sorted by path. Renames are reported as a delete
    /// plus an add.
    pub fn changed_files(&self, rev: &str) -> Result<Vec<ChangedFile>, GitError> {
        let base = self.first_parent(rev)?.unwrap_or_else(|| EMPTY_TREE.to_string());
        let out = self.run(&["diff", "--name-status", "--no-renames", &base, rev])?;
        let mut files: Vec<ChangedFile> = out
            .lines()
            .filter_map(|line| {
                let (status, path) = line.split_once('\t')?;
                let status = match status.chars().next()? {
                    'A' => ChangeStatus::Added,
                    'D' => ChangeStatus::Deleted,
                    'T' => ChangeStatus::TypeChanged,
                    _ => ChangeStatus::Modified,
                };
                Some(ChangedFile { path: path.to_string(), status })
            })
            .collect();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(files)
    }

    /// Unified diff of `rev` against its first parent (empty tree for roots).
    pub fn commit_diff(&self, rev: &str, context: usize) -> Result<String, GitError> {
        let base = self.first_parent(rev)?.unwrap_or_else(|| EMPTY_TREE.to_string());
        let unified = format!("-U{context}");
        self.run(&["diff", "--no-color", "--no-ext-diff", "--no-renames", &unified, &base, rev])
    }

    /// The oldest commit reachable from `rev` that added `path`.
    pub fn commit_adding(&self, rev: &str, path: &str) -> Result<Option<String>, GitError> {
        let out = self.run(&["log", "--format=%H", "--diff-filter=A", rev, "--", path])?;
        Ok(out.lines().last().map(str::to_string))
    }

    /// `git blame --porcelain` for the inclusive line range at `rev`.
    pub fn blame_porcelain(
        &self,
        rev: &str,
        path: &str,
        first: usize,
        last: usize,
    ) -> Result<String, GitError> {
        let range = format!("{first},{last}");
        self.run(&["blame", "--porcelain", "-L", &range, rev, "--", path])
    }
}
