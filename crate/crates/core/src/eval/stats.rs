//! Rank-based significance tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::EvalError;

/// Bonferroni-corrected threshold for three pairwise comparisons.
pub const BONFERRONI_ALPHA: f64 = 0.05 / 3.0;

/// Largest sample size with an exact Wilcoxon p-value.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of tie groups among `values`.
fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub k: usize,
}

/// Friedman test over a complete `rows x k` matrix, with the usual tie
/// correction and a chi-square approximation with k - 1 degrees of freedom.
pub fn friedman(matrix: &[Vec<f64>]) -> Result<FriedmanResult, EvalError> {
    let n = matrix.len();
    let k = matrix.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(EvalError::InsufficientData(format!("friedman needs at least 2x2, got {n}x{k}")));
    }
    if matrix.iter().any(|r| r.len() != k) {
        return Err(EvalError::InsufficientData("ragged matrix".into()));
    }
    let mut col_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in matrix {
        for (j, r) in average_ranks(row).into_iter().enumerate() {
            col_sums[j] += r;
        }
        tie_term += tie_sizes(row).iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    }
    let (nf, kf) = (n as f64, k as f64);
    let c = 1.0 - tie_term / (nf * (kf * kf * kf - kf));
    if c <= 0.0 {
        return Ok(FriedmanResult { statistic: 0.0, p_value: 1.0, n, k });
    }
    let ssq: f64 = col_sums.iter().map(|r| r * r).sum();
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * ssq - 3.0 * nf * (kf + 1.0);
    let statistic = (raw / c).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).expect("positive dof");
    let p_value = (1.0 - chi.cdf(statistic)).clamp(0.0, 1.0);
    Ok(FriedmanResult { statistic, p_value, n, k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// min(W+, W-).
    pub statistic: f64,
    pub p_value: f64,
    /// Nonzero differences used.
    pub n: usize,
    pub method: WilcoxonMethod,
    pub significant: bool,
}

/// Two-sided signed-rank test on paired differences `x - y`. Zero
/// differences are dropped; tied magnitudes share average ranks.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alpha: f64) -> Result<WilcoxonResult, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::InsufficientData("paired samples differ in length".into()));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    wilcoxon_from_differences(&diffs, alpha)
}

pub fn wilcoxon_from_differences(diffs: &[f64], alpha: f64) -> Result<WilcoxonResult, EvalError> {
    let diffs: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Err(EvalError::DegenerateAllZero);
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&mags);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);
    let (p_value, method) = if n <= WILCOXON_EXACT_MAX_N {
        (exact_p(&ranks, statistic), WilcoxonMethod::Exact)
    } else {
        (normal_p(n, &mags, statistic), WilcoxonMethod::Normal)
    };
    Ok(WilcoxonResult { statistic, p_value, n, method, significant: p_value < alpha })
}

/// P(min(W+, W-) <= t) under the null, by counting sign assignments over
/// doubled (integer) ranks.
fn exact_p(ranks: &[f64], t: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let t2 = (t * 2.0).round() as usize;
    if 2 * t2 >= max {
        return 1.0;
    }
    let below: f64 = counts[..=t2].iter().sum();
    let all = 2f64.powi(ranks.len() as i32);
    (2.0 * below / all).min(1.0)
}

fn normal_p(n: usize, mags: &[f64], t: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let ties: f64 = tie_sizes(mags).iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((t - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn all_positive_six() {
        let d = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = wilcoxon_from_differences(&d, BONFERRONI_ALPHA).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 2.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn antisymmetric_is_centered() {
        let r = wilcoxon_from_differences(&[1.0, -1.0, 2.0, -2.0], 0.05).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn all_zero_is_degenerate() {
        assert!(matches!(wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0], 0.05), Err(EvalError::DegenerateAllZero)));
    }

    #[test]
    fn friedman_identical_rows() {
        let m = vec![vec![5.0; 4]; 6];
        let r = friedman(&m).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        assert!(friedman(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn friedman_known_value() {
        // Column 3 always largest, column 0 always smallest, n = 8.
        let m: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 10.0 + i as f64, 20.0, 30.0]).collect();
        let r = friedman(&m).unwrap();
        // Rank sums 8, 16, 24, 32: 12/(8*4*5) * 1920 - 3*8*5 = 24.
        assert!((r.statistic - 24.0).abs() < 1e-9);
        assert!(r.p_value < 0.05);
    }

    #[test]
    fn normal_branch_above_switchover() {
        let d: Vec<f64> = (1..=30).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
        let r = wilcoxon_from_differences(&d, 0.05).unwrap();
        assert_eq!(r.method, WilcoxonMethod::Normal);
        assert!(r.p_value > 0.0 && r.p_value < 1.0);
    }
}
