use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub category: BugCategory,
    pub config: HeuristicKind,
    pub pass_count: usize,
    pub total: usize,
    pub plausible_at_1: f64,
    /// Against the non-history rows of the same category; absent for the
    /// non-history row itself or when those rows are missing.
    pub unique_pass_vs_non_history: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn build(rows: &[OutcomeRow]) -> Result<Self, EvalError> {
        if rows.is_empty() {
            return Err(EvalError::EmptyScope);
        }
        let cells: BTreeSet<(BugCategory, HeuristicKind)> = rows.iter().map(|r| (r.category, r.config)).collect();
        let mut out = Vec::new();
        for (category, config) in cells {
            let scoped: Vec<OutcomeRow> =
                rows.iter().filter(|r| r.category == category && r.config == config).cloned().collect();
            let base: Vec<OutcomeRow> = rows
                .iter()
                .filter(|r| r.category == category && r.config == HeuristicKind::NonHistory)
                .cloned()
                .collect();
            let rate = plausible_at_1(&scoped)?;
            let unique = if config == HeuristicKind::NonHistory || base.is_empty() {
                None
            } else {
                Some(unique_pass(&scoped, &base)?)
            };
            out.push(MetricsRow {
                category,
                config,
                pass_count: rate.passed,
                total: rate.total,
                plausible_at_1: rate.value(),
                unique_pass_vs_non_history: unique,
            });
        }
        Ok(Self { rows: out })
    }

    pub fn get(&self, category: BugCategory, config: HeuristicKind) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.category == category && r.config == config)
    }
}

/// Plain-text table: category, context, #Pass, Plausible@1, #Unique Pass.
pub fn render_repair_table(table: &MetricsTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} {:<12} {:>7} {:>12} {:>14}", "Category", "Context", "# Pass", "Plausible@1", "# Unique Pass");
    let _ = writeln!(out, "{}", "-".repeat(57));
    let mut last = None;
    for r in &table.rows {
        if last.is_some() && last != Some(r.category) {
            let _ = writeln!(out, "{}", "-".repeat(57));
        }
        last = Some(r.category);
        let unique = r.unique_pass_vs_non_history.map_or("-".to_string(), |u| u.to_string());
        let _ = writeln!(
            out,
            "{:<8} {:<12} {:>7} {:>12} {:>14}",
            r.category.as_str(),
            r.config.as_str(),
            r.pass_count,
            format!("{:.1}%", 100.0 * r.plausible_at_1),
            unique
        );
    }
    out
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.4}")
    }
}

pub fn render_stats_report(reports: &[StatTestReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Matched set: bugs passed by all 4 configurations (N). Bonferroni alpha = {:.4}.",
        BONFERRONI_ALPHA
    );
    let _ = writeln!(
        out,
        "{:<8} {:<6} {:>5} {:>11} {:>9} {:>9} {:>9}",
        "Category", "Metric", "N", "Friedman p", "fn_all", "fn_pair", "fl_diff"
    );
    for r in reports {
        let metric = match r.metric {
            Metric::Cost => "Cost",
            Metric::Steps => "Steps",
        };
        let friedman = r.friedman_p.map_or("n/a".to_string(), fmt_p);
        let pair = |i: usize| match &r.pairwise {
            None => "---".to_string(),
            Some(ps) => ps[i].p_value.map_or("n/a".to_string(), |p| {
                format!("{}{}", fmt_p(p), if ps[i].significant { "*" } else { "" })
            }),
        };
        let _ = writeln!(
            out,
            "{:<8} {:<6} {:>5} {:>11} {:>9} {:>9} {:>9}",
            r.category.as_str(),
            metric,
            r.n_matched,
            friedman,
            pair(0),
            pair(1),
            pair(2)
        );
    }
    let _ = writeln!(out, "* p < {:.4}; --- Friedman not significant (p >= 0.05), no post-hoc tests.", BONFERRONI_ALPHA);
    out
}
