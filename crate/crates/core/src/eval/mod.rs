//! Aggregating run outcomes into success, overlap, cost and significance
//! reports.

mod report;
mod stats;

use std::collections::{BTreeMap, BTreeSet};

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{render_stats_report, render_repair_table, MetricsRow, MetricsTable};
pub use stats::{
    average_ranks, friedman, wilcoxon_from_differences, wilcoxon_signed_rank, FriedmanResult, WilcoxonMethod,
    WilcoxonResult, BONFERRONI_ALPHA, WILCOXON_EXACT_MAX_N,
};

use crate::agent::{RunRecord, Termination};
use crate::context::HeuristicKind;
use crate::history::BugCategory;
use crate::par::{self, ExecMode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no rows in scope")]
    EmptyScope,
    #[error("bug universes differ; offending bugs: {0:?}")]
    UniverseMismatch(Vec<String>),
    #[error("duplicate row for bug {bug_id} under {config}")]
    DuplicateRow { bug_id: String, config: HeuristicKind },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("all paired differences are zero")]
    DegenerateAllZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub bug_id: String,
    pub category: BugCategory,
    pub config: HeuristicKind,
    pub passed: bool,
    pub steps: u32,
    pub cost: Decimal,
    pub termination: Termination,
}

impl OutcomeRow {
    /// Pass status comes only from the independent end-of-run test.
    pub fn from_record(record: &RunRecord, category: BugCategory) -> Self {
        Self {
            bug_id: record.bug_id.clone(),
            category,
            config: record.config,
            passed: record.tests_passed_at_end,
            steps: record.steps_taken,
            cost: record.total_cost,
            termination: record.termination,
        }
    }
}

/// An exact rate, rendered at fixed precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub passed: usize,
    pub total: usize,
}

impl Rate {
    pub fn value(&self) -> f64 {
        self.passed as f64 / self.total as f64
    }

    pub fn percent(&self) -> String {
        format!("{:.1}%", 100.0 * self.value())
    }
}

pub fn plausible_at_1(rows: &[OutcomeRow]) -> Result<Rate, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyScope);
    }
    Ok(Rate { passed: rows.iter().filter(|r| r.passed).count(), total: rows.len() })
}

fn bug_set<'a>(rows: impl IntoIterator<Item = &'a OutcomeRow>) -> BTreeSet<&'a str> {
    rows.into_iter().map(|r| r.bug_id.as_str()).collect()
}

fn check_universe(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> Result<(), EvalError> {
    if a == b {
        return Ok(());
    }
    Err(EvalError::UniverseMismatch(a.symmetric_difference(b).map(|s| s.to_string()).collect()))
}

pub fn unique_pass(config_rows: &[OutcomeRow], baseline_rows: &[OutcomeRow]) -> Result<usize, EvalError> {
    check_universe(&bug_set(config_rows), &bug_set(baseline_rows))?;
    let base = bug_set(baseline_rows.iter().filter(|r| r.passed));
    Ok(bug_set(config_rows.iter().filter(|r| r.passed)).difference(&base).count())
}

/// Rows indexed by config then bug, with the shared universe validated.
#[derive(Debug, Clone)]
pub struct OutcomeMatrix<'a> {
    pub configs: Vec<HeuristicKind>,
    pub bugs: Vec<&'a str>,
    cells: BTreeMap<(HeuristicKind, &'a str), &'a OutcomeRow>,
}

impl<'a> OutcomeMatrix<'a> {
    pub fn new(rows: &'a [OutcomeRow]) -> Result<Self, EvalError> {
        if rows.is_empty() {
            return Err(EvalError::EmptyScope);
        }
        let mut cells = BTreeMap::new();
        for r in rows {
            if cells.insert((r.config, r.bug_id.as_str()), r).is_some() {
                return Err(EvalError::DuplicateRow { bug_id: r.bug_id.clone(), config: r.config });
            }
        }
        let configs: Vec<HeuristicKind> = rows.iter().map(|r| r.config).collect::<BTreeSet<_>>().into_iter().collect();
        let universe = bug_set(rows);
        for &c in &configs {
            check_universe(&bug_set(rows.iter().filter(|r| r.config == c)), &universe)?;
        }
        Ok(Self { configs, bugs: universe.into_iter().collect(), cells })
    }

    pub fn get(&self, config: HeuristicKind, bug: &str) -> &'a OutcomeRow {
        self.cells[&(config, bug)]
    }

    pub fn passed(&self, config: HeuristicKind, bug: &str) -> bool {
        self.get(config, bug).passed
    }
}

/// Bug counts per exact subset of passing configs, keyed by bitmask over
/// `HeuristicKind::ALL` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub regions: BTreeMap<String, usize>,
    pub union: usize,
}

pub fn subset_label(mask: u8) -> String {
    HeuristicKind::ALL
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, k)| k.as_str())
        .collect::<Vec<_>>()
        .join("+")
}

pub fn overlap_regions(rows: &[OutcomeRow]) -> Result<OverlapReport, EvalError> {
    let m = OutcomeMatrix::new(rows)?;
    let mut counts = [0usize; 16];
    for bug in &m.bugs {
        let mut mask = 0u8;
        for &c in &m.configs {
            if m.passed(c, bug) {
                mask |= 1 << c.index();
            }
        }
        counts[mask as usize] += 1;
    }
    let regions = (1u8..16).map(|mask| (subset_label(mask), counts[mask as usize])).collect();
    Ok(OverlapReport { regions, union: counts[1..].iter().sum() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Some(Summary {
        n: s.len(),
        median: quantile(&s, 0.5),
        q1: quantile(&s, 0.25),
        q3: quantile(&s, 0.75),
        min: s[0],
        max: s[s.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub category: BugCategory,
    pub config: HeuristicKind,
    pub passed: bool,
    pub steps: Summary,
    pub cost: Summary,
}

/// Steps and cost distributions split by outcome. Empty strata are absent.
pub fn stratify(rows: &[OutcomeRow]) -> Vec<Stratum> {
    let mut groups: BTreeMap<(BugCategory, HeuristicKind, bool), Vec<&OutcomeRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.category, r.config, r.passed)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((category, config, passed), rs)| {
            let steps: Vec<f64> = rs.iter().map(|r| r.steps as f64).collect();
            let cost: Vec<f64> = rs.iter().map(|r| r.cost.to_f64().unwrap_or(0.0)).collect();
            Stratum { category, config, passed, steps: summarize(&steps).unwrap(), cost: summarize(&cost).unwrap() }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub combo: Vec<HeuristicKind>,
    pub passed: usize,
    pub total: usize,
    pub success_rate: f64,
    /// Mean over bugs of the summed cost of every combo member.
    pub avg_cost: Decimal,
}

/// Every non-empty combination of the configs present, sorted by size then
/// cost.
pub fn tradeoff_frontier(rows: &[OutcomeRow], mode: ExecMode) -> Result<Vec<TradeoffPoint>, EvalError> {
    let m = OutcomeMatrix::new(rows)?;
    let k = m.configs.len();
    let masks: Vec<u32> = (1u32..(1 << k)).collect();
    let total = m.bugs.len();
    let mut points = par::map(mode, &masks, |&mask| {
        let combo: Vec<HeuristicKind> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| m.configs[i]).collect();
        let mut passed = 0;
        let mut cost = Decimal::ZERO;
        for bug in &m.bugs {
            if combo.iter().any(|&c| m.passed(c, bug)) {
                passed += 1;
            }
            cost += combo.iter().map(|&c| m.get(c, bug).cost).sum::<Decimal>();
        }
        TradeoffPoint {
            combo,
            passed,
            total,
            success_rate: passed as f64 / total as f64,
            avg_cost: cost / Decimal::from(total),
        }
    });
    points.sort_by(|a, b| a.combo.len().cmp(&b.combo.len()).then(a.avg_cost.cmp(&b.avg_cost)).then(a.combo.cmp(&b.combo)));
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cost,
    Steps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub config: HeuristicKind,
    /// `None` when every paired difference was zero.
    pub p_value: Option<f64>,
    pub statistic: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestReport {
    pub metric: Metric,
    pub category: BugCategory,
    pub n_matched: usize,
    pub friedman_statistic: Option<f64>,
    pub friedman_p: Option<f64>,
    /// Present only when the Friedman test is significant at 0.05.
    pub pairwise: Option<Vec<PairwiseResult>>,
    pub alpha_corrected: f64,
}

/// Friedman plus post-hoc Wilcoxon tests on the matched set: bugs passed by
/// every configuration.
pub fn stat_tests(rows: &[OutcomeRow], category: BugCategory, metric: Metric) -> Result<StatTestReport, EvalError> {
    let scoped: Vec<OutcomeRow> = rows.iter().filter(|r| r.category == category).cloned().collect();
    let m = OutcomeMatrix::new(&scoped)?;
    if m.configs != HeuristicKind::ALL {
        return Err(EvalError::InsufficientData("statistical tests need all four configurations".into()));
    }
    let value = |r: &OutcomeRow| match metric {
        Metric::Cost => r.cost.to_f64().unwrap_or(0.0),
        Metric::Steps => r.steps as f64,
    };
    let matched: Vec<&str> =
        m.bugs.iter().copied().filter(|b| m.configs.iter().all(|&c| m.passed(c, b))).collect();
    let matrix: Vec<Vec<f64>> =
        matched.iter().map(|b| m.configs.iter().map(|&c| value(m.get(c, b))).collect()).collect();
    let mut report = StatTestReport {
        metric,
        category,
        n_matched: matched.len(),
        friedman_statistic: None,
        friedman_p: None,
        pairwise: None,
        alpha_corrected: BONFERRONI_ALPHA,
    };
    let Ok(fr) = friedman(&matrix) else {
        return Ok(report);
    };
    report.friedman_statistic = Some(fr.statistic);
    report.friedman_p = Some(fr.p_value);
    if fr.p_value < 0.05 {
        let base: Vec<f64> = matrix.iter().map(|r| r[0]).collect();
        let pairwise = (1..4)
            .map(|j| {
                let other: Vec<f64> = matrix.iter().map(|r| r[j]).collect();
                match wilcoxon_signed_rank(&other, &base, BONFERRONI_ALPHA) {
                    Ok(w) => PairwiseResult {
                        config: m.configs[j],
                        p_value: Some(w.p_value),
                        statistic: Some(w.statistic),
                        significant: w.significant,
                    },
                    Err(_) => PairwiseResult { config: m.configs[j], p_value: None, statistic: None, significant: false },
                }
            })
            .collect();
        report.pairwise = Some(pairwise);
    }
    Ok(report)
}

/// Every output of the harness for one set of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBundle {
    pub metrics: MetricsTable,
    pub overlaps: BTreeMap<BugCategory, OverlapReport>,
    pub tradeoffs: BTreeMap<BugCategory, Vec<TradeoffPoint>>,
    pub strata: Vec<Stratum>,
    pub stats: Vec<StatTestReport>,
}

pub fn evaluate(rows: &[OutcomeRow], mode: ExecMode) -> Result<EvalBundle, EvalError> {
    OutcomeMatrix::new(rows)?;
    let metrics = MetricsTable::build(rows)?;
    let categories: Vec<BugCategory> = rows.iter().map(|r| r.category).collect::<BTreeSet<_>>().into_iter().collect();
    let per_cat = par::map(mode, &categories, |&cat| {
        let scoped: Vec<OutcomeRow> = rows.iter().filter(|r| r.category == cat).cloned().collect();
        let overlap = overlap_regions(&scoped);
        let trade = tradeoff_frontier(&scoped, ExecMode::Sequential);
        let stats: Vec<StatTestReport> =
            [Metric::Cost, Metric::Steps].into_iter().filter_map(|m| stat_tests(&scoped, cat, m).ok()).collect();
        (cat, overlap, trade, stats)
    });
    let mut overlaps = BTreeMap::new();
    let mut tradeoffs = BTreeMap::new();
    let mut stats = Vec::new();
    for (cat, overlap, trade, s) in per_cat {
        overlaps.insert(cat, overlap?);
        tradeoffs.insert(cat, trade?);
        stats.extend(s);
    }
    Ok(EvalBundle { metrics, overlaps, tradeoffs, strata: stratify(rows), stats })
}
