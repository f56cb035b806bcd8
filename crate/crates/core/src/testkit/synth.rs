//! Random repositories with known per-line history.
//!
//! Every generated line is unique, so a line-based diff between successive
//! versions is unambiguous and `git blame` must agree with the model kept
//! here. Files open with a block of comment lines so that insertion points
//! near the top have no executable line above them.

use std::path::Path;

use rand::Rng;

use super::{FixtureError, RepoBuilder};
use crate::git::Repo;

#[derive(Debug, Clone, Copy)]
pub struct SynthParams {
    pub max_files: usize,
    pub min_commits: usize,
    pub max_commits: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { max_files: 3, min_commits: 3, max_commits: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthLine {
    pub text: String,
    /// Index into [`SynthRepo::commits`] of the last commit touching it.
    pub commit: usize,
    pub executable: bool,
}

#[derive(Debug, Clone)]
pub struct SynthFile {
    pub path: String,
    pub lines: Vec<SynthLine>,
    /// Index of the commit that created the file.
    pub added_in: usize,
}

impl SynthFile {
    fn render(&self) -> String {
        let mut s: String = self.lines.iter().map(|l| format!("{}\n", l.text)).collect();
        if s.is_empty() {
            s.push('\n');
        }
        s
    }
}

/// State of the repository at its last commit (the snapshot).
#[derive(Debug, Clone)]
pub struct SynthRepo {
    pub repo: Repo,
    pub commits: Vec<String>,
    pub times: Vec<i64>,
    pub files: Vec<SynthFile>,
}

impl SynthRepo {
    pub fn snapshot(&self) -> &str {
        self.commits.last().expect("at least one commit")
    }

    /// Patch against the snapshot rewriting the given 1-based lines of one
    /// file. The worktree is left clean.
    pub fn patch_modifying(&self, file: usize, lines: &[u32]) -> Result<String, FixtureError> {
        let f = &self.files[file];
        let text: String = f
            .lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if lines.contains(&(i as u32 + 1)) {
                    format!("{} /* fixed */\n", l.text)
                } else {
                    format!("{}\n", l.text)
                }
            })
            .collect();
        std::fs::write(self.repo.path().join(&f.path), text)?;
        let diff = self.repo.run(&["diff", "--no-color", "--no-ext-diff", "HEAD"])?;
        self.repo.run(&["checkout", "--quiet", "--", "."])?;
        Ok(diff)
    }
}

struct Gen<'a, R: Rng> {
    rng: &'a mut R,
    counter: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn line(&mut self, commit: usize, executable: bool) -> SynthLine {
        self.counter += 1;
        let n = self.counter;
        let text = if executable {
            format!("    int v{n} = {n} * 2;")
        } else if self.rng.gen_bool(0.5) {
            format!("    // note {n}")
        } else {
            format!("}} /* {n} */")
        };
        SynthLine { text, commit, executable }
    }

    fn random_line(&mut self, commit: usize) -> SynthLine {
        let exec = self.rng.gen_bool(0.6);
        self.line(commit, exec)
    }

    /// A run of lines, sometimes a long comment run to force window
    /// extensions.
    fn block(&mut self, commit: usize, len: usize) -> Vec<SynthLine> {
        if self.rng.gen_bool(0.2) {
            let run = self.rng.gen_range(6..=14);
            let mut out: Vec<SynthLine> = (0..run).map(|_| self.line(commit, false)).collect();
            out.push(self.line(commit, true));
            return out;
        }
        (0..len).map(|_| self.random_line(commit)).collect()
    }

    fn new_file(&mut self, index: usize, commit: usize) -> SynthFile {
        let header = self.rng.gen_range(1..=8);
        let mut lines: Vec<SynthLine> = (0..header).map(|_| self.line(commit, false)).collect();
        let body = self.rng.gen_range(6..=24);
        while lines.len() < header + body {
            let len = self.rng.gen_range(1..=4);
            lines.extend(self.block(commit, len));
        }
        SynthFile { path: format!("src/unit{index}.c"), lines, added_in: commit }
    }

    fn edit(&mut self, file: &mut SynthFile, commit: usize) {
        match self.rng.gen_range(0..3) {
            0 => {
                for _ in 0..self.rng.gen_range(1..=3) {
                    let at = self.rng.gen_range(0..file.lines.len());
                    let exec = file.lines[at].executable || self.rng.gen_bool(0.3);
                    file.lines[at] = self.line(commit, exec);
                }
            }
            1 => {
                let at = self.rng.gen_range(0..=file.lines.len());
                let len = self.rng.gen_range(1..=4);
                let block = self.block(commit, len);
                file.lines.splice(at..at, block);
            }
            _ => {
                if file.lines.len() > 4 {
                    let at = self.rng.gen_range(0..file.lines.len() - 1);
                    let n = self.rng.gen_range(1..=2);
                    file.lines.drain(at..at + n);
                } else {
                    let at = self.rng.gen_range(0..file.lines.len());
                    file.lines[at] = self.line(commit, true);
                }
            }
        }
    }
}

/// Build one random repository at `dir`.
pub fn generate(dir: &Path, rng: &mut impl Rng, params: SynthParams) -> Result<SynthRepo, FixtureError> {
    let mut builder = RepoBuilder::init(dir)?;
    let mut g = Gen { rng, counter: 0 };
    let n_commits = g.rng.gen_range(params.min_commits..=params.max_commits);
    let mut files: Vec<SynthFile> = Vec::new();
    let mut commits = Vec::new();
    let mut times = Vec::new();
    for c in 0..n_commits {
        let add_file = files.is_empty() || (files.len() < params.max_files && g.rng.gen_bool(0.2));
        let mut touched = Vec::new();
        if add_file {
            let f = g.new_file(files.len(), c);
            touched.push(files.len());
            files.push(f);
        } else {
            for _ in 0..g.rng.gen_range(1..=2) {
                let i = g.rng.gen_range(0..files.len());
                g.edit(&mut files[i], c);
                touched.push(i);
            }
        }
        for &i in &touched {
            builder.write(&files[i].path, &files[i].render())?;
        }
        times.push(builder.next_time());
        commits.push(builder.commit(&format!("change {c}"))?);
    }
    Ok(SynthRepo { repo: builder.repo().clone(), commits, times, files })
}
