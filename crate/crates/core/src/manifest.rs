//! Dataset manifests: one JSON object per line, one line per bug.
//!
//! ```text
//! {"id": "Calc-1", "repo": "repos/calc", "snapshot_ref": "a1b2c3",
//!  "failing_tests": ["calc::test_add"], "report_path": "reports/Calc-1.md",
//!  "fix_patch_path": "patches/Calc-1.diff"}
//! ```
//!
//! Relative paths resolve against the manifest's directory. `locations`
//! may be given explicitly; otherwise it is derived from the fix patch.
//! `category` likewise defaults to the fix patch's category.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::FixPatch;
use crate::git::Repo;
use crate::history::{categorize_bug, locations_from_patch, BugCategory, BugSpec, Exclusion, FaultLocation, StudyItem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub repo: PathBuf,
    pub snapshot_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locations: Option<Vec<FaultLocation>>,
    #[serde(default)]
    pub failing_tests: Vec<String>,
    pub report_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix_patch_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<BugCategory>,
    /// Adapter override for this bug.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapter: Option<String>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("manifest {0} lists no bugs")]
    Empty(PathBuf),
    #[error("duplicate bug id `{0}`")]
    Duplicate(String),
    #[error("bug `{0}` is not in the manifest")]
    NotFound(String),
    #[error("bug `{bug}`: {message}")]
    Invalid { bug: String, message: String },
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub path: PathBuf,
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

fn read(path: &Path) -> Result<String, ManifestError> {
    std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = read(path)?;
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| ManifestError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if !seen.insert(entry.id.clone()) {
                return Err(ManifestError::Duplicate(entry.id));
            }
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(ManifestError::Empty(path.to_path_buf()));
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { path: path.to_path_buf(), base_dir, entries })
    }

    pub fn find(&self, id: &str) -> Result<&ManifestEntry, ManifestError> {
        self.entries.iter().find(|e| e.id == id).ok_or_else(|| ManifestError::NotFound(id.to_string()))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn repo(&self, e: &ManifestEntry) -> Repo {
        Repo::open(self.resolve(&e.repo))
    }

    pub fn fix_patch(&self, e: &ManifestEntry) -> Result<Option<FixPatch>, ManifestError> {
        let Some(p) = &e.fix_patch_path else {
            return Ok(None);
        };
        let text = read(&self.resolve(p))?;
        FixPatch::parse(&text)
            .map(Some)
            .map_err(|err| ManifestError::Invalid { bug: e.id.clone(), message: format!("fix patch: {err}") })
    }

    pub fn category(&self, e: &ManifestEntry) -> Result<BugCategory, ManifestError> {
        if let Some(c) = e.category {
            return Ok(c);
        }
        let invalid = |message: String| ManifestError::Invalid { bug: e.id.clone(), message };
        let patch = self.fix_patch(e)?.ok_or_else(|| invalid("no category and no fix patch".into()))?;
        categorize_bug(&patch).map_err(|err| invalid(err.to_string()))
    }

    pub fn bug_spec(&self, e: &ManifestEntry) -> Result<BugSpec, ManifestError> {
        let invalid = |message: String| ManifestError::Invalid { bug: e.id.clone(), message };
        let locations = match &e.locations {
            Some(l) => l.clone(),
            None => {
                let patch = self.fix_patch(e)?.ok_or_else(|| invalid("no locations and no fix patch".into()))?;
                locations_from_patch(&patch)
            }
        };
        let spec = BugSpec {
            bug_id: e.id.clone(),
            snapshot_ref: e.snapshot_ref.clone(),
            locations,
            failing_tests: e.failing_tests.clone(),
            bug_report: read(&self.resolve(&e.report_path))?,
        };
        spec.validate().map_err(|err| invalid(err.to_string()))?;
        Ok(spec)
    }

    /// Inputs for the availability study; bugs that cannot be loaded become
    /// exclusions rather than being dropped.
    pub fn study_items(&self) -> (Vec<StudyItem>, Vec<Exclusion>) {
        let mut items = Vec::new();
        let mut exclusions = Vec::new();
        for e in &self.entries {
            let loaded = self.bug_spec(e).and_then(|spec| {
                let patch = self.fix_patch(e)?.ok_or_else(|| ManifestError::Invalid {
                    bug: e.id.clone(),
                    message: "the study needs a fix patch".into(),
                })?;
                Ok(StudyItem { spec, patch, repo: self.repo(e) })
            });
            match loaded {
                Ok(item) => items.push(item),
                Err(err) => exclusions.push(Exclusion { bug_id: e.id.clone(), reason: err.to_string() }),
            }
        }
        (items, exclusions)
    }
}
