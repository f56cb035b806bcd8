//! Blame availability study: how often a blame commit exists per bug
//! category, and how many unique commits each bug spreads over.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::blame::{summarize_blame, Snapshot};
use super::category::categorize_bug;
use super::judge::CommitJudge;
use super::types::*;
use crate::diff::FixPatch;
use crate::git::Repo;
use crate::par::{self, ExecMode};

#[derive(Debug, Clone)]
pub struct StudyItem {
    pub spec: BugSpec,
    pub patch: FixPatch,
    pub repo: Repo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyRow {
    pub bug_id: String,
    pub category: BugCategory,
    pub blameability: Blameability,
    pub unique_commits: usize,
    pub resolution_method: ResolutionMethod,
    pub resolved_commit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub bug_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub blameable: usize,
    pub blameless: usize,
}

impl CategoryCounts {
    pub fn total(&self) -> usize {
        self.blameable + self.blameless
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvailabilityReport {
    pub rows: Vec<StudyRow>,
    pub exclusions: Vec<Exclusion>,
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 * 100.0 / whole as f64
    }
}

impl AvailabilityReport {
    pub fn dataset_size(&self) -> usize {
        self.rows.len() + self.exclusions.len()
    }

    pub fn excluded_fraction(&self) -> f64 {
        if self.dataset_size() == 0 {
            0.0
        } else {
            self.exclusions.len() as f64 / self.dataset_size() as f64
        }
    }

    pub fn counts(&self) -> BTreeMap<BugCategory, CategoryCounts> {
        let mut out: BTreeMap<BugCategory, CategoryCounts> =
            BugCategory::ALL.iter().map(|&c| (c, CategoryCounts::default())).collect();
        for r in &self.rows {
            let slot = out.get_mut(&r.category).expect("all categories present");
            match r.blameability {
                Blameability::Blameable => slot.blameable += 1,
                Blameability::Blameless => slot.blameless += 1,
            }
        }
        out
    }

    pub fn totals(&self) -> CategoryCounts {
        self.counts().values().fold(CategoryCounts::default(), |acc, c| CategoryCounts {
            blameable: acc.blameable + c.blameable,
            blameless: acc.blameless + c.blameless,
        })
    }

    /// Number of bugs per count of unique blame commits, per category.
    pub fn histogram(&self) -> BTreeMap<BugCategory, BTreeMap<usize, usize>> {
        let mut out: BTreeMap<BugCategory, BTreeMap<usize, usize>> = BTreeMap::new();
        for r in &self.rows {
            *out.entry(r.category).or_default().entry(r.unique_commits).or_default() += 1;
        }
        out
    }

    pub fn histogram_total(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            *out.entry(r.unique_commits).or_default() += 1;
        }
        out
    }

    /// Plain-text table: within-category percentages for blameable and
    /// blameless, dataset share for the total column.
    pub fn render_table(&self) -> String {
        let counts = self.counts();
        let n: usize = counts.values().map(CategoryCounts::total).sum();
        let mut s = String::new();
        let _ = writeln!(s, "Blame availability by bug category");
        let _ = writeln!(
            s,
            "{:<9}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}",
            "Category", "Blm #", "Blm %", "Bll #", "Bll %", "Tot #", "Tot %"
        );
        let row = |s: &mut String, name: &str, c: &CategoryCounts| {
            let _ = writeln!(
                s,
                "{:<9}{:>8}{:>8.1}{:>8}{:>8.1}{:>8}{:>8.1}",
                name,
                c.blameable,
                pct(c.blameable, c.total()),
                c.blameless,
                pct(c.blameless, c.total()),
                c.total(),
                pct(c.total(), n)
            );
        };
        for (cat, c) in &counts {
            row(&mut s, cat.as_str(), c);
        }
        row(&mut s, "Total", &self.totals());
        let _ = writeln!(s, "\nUnique blame commits per bug");
        let hist = self.histogram();
        for (count, bugs) in self.histogram_total() {
            let per_cat: Vec<String> = BugCategory::ALL
                .iter()
                .map(|c| format!("{}={}", c, hist.get(c).and_then(|h| h.get(&count)).copied().unwrap_or(0)))
                .collect();
            let _ = writeln!(s, "{count:>3} commit(s): {bugs:>5} bugs ({})", per_cat.join(", "));
        }
        if !self.exclusions.is_empty() {
            let _ = writeln!(s, "\nExclusions ({})", self.exclusions.len());
            for e in &self.exclusions {
                let _ = writeln!(s, "  {}: {}", e.bug_id, e.reason);
            }
        }
        s
    }
}

pub fn study_bug(item: &StudyItem, judge: &dyn CommitJudge) -> Result<StudyRow, String> {
    let category = categorize_bug(&item.patch).map_err(|e| e.to_string())?;
    let snap = Snapshot::new(item.repo.clone(), item.spec.snapshot_ref.clone());
    let summary = summarize_blame(&snap, &item.spec, judge).map_err(|e| e.to_string())?;
    Ok(StudyRow {
        bug_id: item.spec.bug_id.clone(),
        category,
        blameability: summary.blameability,
        unique_commits: summary.unique_commits.len(),
        resolution_method: summary.resolution_method,
        resolved_commit: summary.resolved_commit,
    })
}

pub fn availability_report(items: &[StudyItem], judge: &dyn CommitJudge, mode: ExecMode) -> AvailabilityReport {
    let results = par::map(mode, items, |item| study_bug(item, judge));
    let mut report = AvailabilityReport::default();
    for (item, result) in items.iter().zip(results) {
        match result {
            Ok(row) => report.rows.push(row),
            Err(reason) => report.exclusions.push(Exclusion { bug_id: item.spec.bug_id.clone(), reason }),
        }
    }
    report
}
