//! Rank statistics: Spearman correlation, Wilcoxon rank-sum test and
//! two-group summaries.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Significance level for the group-difference star.
pub const SIGNIFICANCE: f64 = 0.001;

/// Largest pooled size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 20;

/// Average ranks (1-based); tied values share the mean of their positions.
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
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("spearman needs at least 3 pairs, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite value in correlation input".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::UndefinedCorrelation("constant input vector".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSumTest {
    /// Sum of the pooled average ranks of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub method: PMethod,
}

/// Two-sided Wilcoxon rank-sum test of `a` against `b`.
///
/// Uses the exact null distribution when the pooled size is at most
/// [`EXACT_MAX_N`] and there are no ties; otherwise the normal approximation
/// with tie-corrected variance and a 0.5 continuity correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("both samples need at least one value".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite value in rank-sum input".into()));
    }
    let ranks = average_ranks(&pooled);
    let w: f64 = ranks[..a.len()].iter().sum();
    let tie_groups = tie_sizes(&pooled);
    let has_ties = tie_groups.iter().any(|&t| t > 1);

    if pooled.len() <= EXACT_MAX_N && !has_ties {
        let p = exact_p(w.round() as usize, a.len(), pooled.len());
        return Ok(RankSumTest {
            statistic: w,
            p_value: p,
            method: PMethod::Exact,
        });
    }

    let (m, n) = (a.len() as f64, b.len() as f64);
    let total = m + n;
    let mean = m * (total + 1.0) / 2.0;
    let tie_term: f64 = tie_groups.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (total * (total - 1.0));
    let var = m * n / 12.0 * ((total + 1.0) - if total > 1.0 { tie_term } else { 0.0 });
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(RankSumTest {
        statistic: w,
        p_value: p,
        method: PMethod::Normal,
    })
}

fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|x, y| x == y)
        .map(<[f64]>::len)
        .collect()
}

/// Number of `m`-subsets of `{1..=total}` by rank sum.
fn rank_sum_counts(m: usize, total: usize) -> Vec<u128> {
    let max_sum = total * (total + 1) / 2;
    // counts[j][s]: subsets of size j with sum s among the ranks seen so far
    let mut counts = vec![vec![0u128; max_sum + 1]; m + 1];
    counts[0][0] = 1;
    for rank in 1..=total {
        for j in (1..=m.min(rank)).rev() {
            for s in (rank..=max_sum).rev() {
                counts[j][s] += counts[j - 1][s - rank];
            }
        }
    }
    counts.swap_remove(m)
}

fn exact_p(w: usize, m: usize, total: usize) -> f64 {
    let counts = rank_sum_counts(m, total);
    let all: u128 = counts.iter().sum();
    let lower: u128 = counts[..=w].iter().sum();
    let upper: u128 = counts[w..].iter().sum();
    let tail = lower.min(upper);
    (2.0 * tail as f64 / all as f64).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub measure: String,
    pub patient_mean: f64,
    pub patient_sd: f64,
    pub control_mean: f64,
    pub control_sd: f64,
    pub patient_n: usize,
    pub control_n: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Per-group mean and sample standard deviation with a rank-sum test,
/// patients as the first sample.
pub fn group_summary(values: &[f64], labels: &[Label], measure: &str) -> Result<GroupSummary> {
    if values.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} values but {} labels",
            values.len(),
            labels.len()
        )));
    }
    let pick = |want: Label| -> Vec<f64> {
        values
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == want)
            .map(|(&v, _)| v)
            .collect()
    };
    let patients = pick(Label::Patient);
    let controls = pick(Label::Control);
    if patients.is_empty() || controls.is_empty() {
        return Err(Error::InsufficientData(format!(
            "`{measure}` needs both groups (patients {}, controls {})",
            patients.len(),
            controls.len()
        )));
    }
    let test = wilcoxon_rank_sum(&patients, &controls)?;
    let (patient_mean, patient_sd) = mean_sd(&patients);
    let (control_mean, control_sd) = mean_sd(&controls);
    Ok(GroupSummary {
        measure: measure.to_string(),
        patient_mean,
        patient_sd,
        control_mean,
        control_sd,
        patient_n: patients.len(),
        control_n: controls.len(),
        statistic: test.statistic,
        p_value: test.p_value,
        significant: test.p_value < SIGNIFICANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn spearman_examples() {
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]).unwrap(), 1.0);
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // ranks [1, 2.5, 2.5, 4] vs [2, 1, 3, 4]: deviations (-1.5,0,0,1.5)·(-0.5,-1.5,0.5,1.5)
        // sxy = 0.75 + 2.25 = 3, sxx = 4.5, syy = 5
        let expected = 3.0 / (4.5f64.sqrt() * 5f64.sqrt());
        assert_relative_eq!(spearman(&[1.0, 2.0, 2.0, 4.0], &[2.0, 1.0, 3.0, 4.0]).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::InsufficientData(_))));
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rank_sum_minimal() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 3.0);
        assert_eq!(r.method, PMethod::Exact);
        assert_relative_eq!(r.p_value, 2.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn rank_sum_identical_samples() {
        let a = [0.1, 0.2, 0.3, 0.4];
        let r = wilcoxon_rank_sum(&a, &a).unwrap();
        assert_eq!(r.method, PMethod::Normal);
        assert!(r.p_value >= 0.999);
    }

    #[test]
    fn rank_sum_large_shift() {
        let b: Vec<f64> = (0..10).map(f64::from).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 100.0).collect();
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_eq!(r.method, PMethod::Exact);
        // only the two extreme assignments out of C(20,10) = 184756
        assert_relative_eq!(r.p_value, 2.0 / 184_756.0, epsilon = 1e-18);
        assert!(r.p_value < 0.001);
    }

    #[test]
    fn rank_sum_all_tied() {
        let r = wilcoxon_rank_sum(&[1.0, 1.0], &[1.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn summary_constant_groups() {
        let mut values = vec![0.3; 10];
        values.extend([0.4; 10]);
        let mut labels = vec![Label::Patient; 10];
        labels.extend([Label::Control; 10]);
        let s = group_summary(&values, &labels, "x").unwrap();
        assert_relative_eq!(s.patient_mean, 0.3, epsilon = 1e-12);
        assert_relative_eq!(s.control_mean, 0.4, epsilon = 1e-12);
        assert!(s.patient_sd < 1e-12 && s.control_sd < 1e-12);
        assert!(s.significant);
        assert_eq!(s.significant, s.p_value < SIGNIFICANCE);
    }

    #[test]
    fn summary_identical_groups_not_significant() {
        let values = [0.1, 0.2, 0.3, 0.1, 0.2, 0.3];
        let labels = [Label::Patient, Label::Patient, Label::Patient, Label::Control, Label::Control, Label::Control];
        assert!(!group_summary(&values, &labels, "x").unwrap().significant);
    }

    #[test]
    fn summary_single_class_rejected() {
        assert!(group_summary(&[0.1, 0.2], &[Label::Patient, Label::Patient], "x").is_err());
    }
}
