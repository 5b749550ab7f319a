//! One-sided paired significance tests for "treatment beats baseline".

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// p-values below this are reported as significant.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Largest number of nonzero differences handled by exact enumeration.
pub const EXACT_WILCOXON_MAX_N: usize = 25;

/// Minimum number of pairs accepted by [`paired_tests`].
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    TTest,
    Wilcoxon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub kind: TestKind,
    pub statistic: f64,
    /// One-sided p-value for `treated > baseline`.
    pub p_value: f64,
    /// Pairs that entered the statistic (Wilcoxon drops zero differences).
    pub n: usize,
}

impl PairedTestResult {
    pub fn is_significant(&self) -> bool {
        self.p_value < SIGNIFICANCE_LEVEL
    }
}

fn differences(baseline: &[f64], treated: &[f64]) -> Result<Vec<f64>> {
    if baseline.len() != treated.len() {
        return Err(Error::LengthMismatch {
            expected: baseline.len(),
            found: treated.len(),
        });
    }
    Ok(treated.iter().zip(baseline).map(|(t, b)| t - b).collect())
}

/// One-sided paired Student's t-test on `treated - baseline`.
///
/// Zero variance maps to `t = 0, p = 0.5` when the mean difference is zero and
/// to `t = ±∞` otherwise.
pub fn paired_t_test(baseline: &[f64], treated: &[f64]) -> Result<PairedTestResult> {
    let d = differences(baseline, treated)?;
    let n = d.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let (statistic, p_value) = if var == 0.0 {
        match mean.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => (f64::INFINITY, 0.0),
            Some(std::cmp::Ordering::Less) => (f64::NEG_INFINITY, 1.0),
            _ => (0.0, 0.5),
        }
    } else {
        let t = mean / (var / nf).sqrt();
        let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("positive degrees of freedom");
        (t, dist.sf(t))
    };
    Ok(PairedTestResult {
        kind: TestKind::TTest,
        statistic,
        p_value,
        n,
    })
}

/// Average (1-based) ranks of `values`, ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Exact null distribution of the signed-rank sum `W+` for given ranks.
///
/// Ranks are multiples of ½ (average ranks), so sums are tracked in
/// half-units. Every sign pattern is equally likely under the null.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedRankNull {
    /// `probs[s]` is `P(W+ = s / 2)`.
    probs: Vec<f64>,
}

impl SignedRankNull {
    pub fn new(ranks: &[f64]) -> Self {
        let halves: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = halves.iter().sum();
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        let mut reach = 0;
        for &h in &halves {
            for s in (0..=reach).rev() {
                let c = counts[s];
                if c != 0.0 {
                    counts[s + h] += c;
                }
            }
            reach += h;
        }
        let patterns = 2f64.powi(ranks.len() as i32);
        Self {
            probs: counts.into_iter().map(|c| c / patterns).collect(),
        }
    }

    /// `(w, P(W+ = w))` over the support.
    pub fn pmf(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| (s as f64 / 2.0, p))
    }

    /// `P(W+ ≥ w)`.
    pub fn upper_tail(&self, w: f64) -> f64 {
        let start = (2.0 * w).round().max(0.0) as usize;
        self.probs.iter().skip(start).sum::<f64>().min(1.0)
    }
}

/// One-sided Wilcoxon signed-rank test on `treated - baseline`.
///
/// Zero differences are dropped and tied magnitudes get average ranks. The
/// p-value is exact up to [`EXACT_WILCOXON_MAX_N`] nonzero pairs and uses the
/// tie-corrected normal approximation (with continuity correction) beyond.
pub fn wilcoxon_signed_rank(baseline: &[f64], treated: &[f64]) -> Result<PairedTestResult> {
    let d: Vec<f64> = differences(baseline, treated)?
        .into_iter()
        .filter(|&x| x != 0.0)
        .collect();
    if d.is_empty() {
        return Err(Error::AllDifferencesZero);
    }
    let magnitudes: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let n = d.len();

    let p_value = if n <= EXACT_WILCOXON_MAX_N {
        SignedRankNull::new(&ranks).upper_tail(w_plus)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut sorted = magnitudes.clone();
        sorted.sort_by(f64::total_cmp);
        let mut tie_term = 0.0;
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
            let t = j as f64;
            tie_term += t * t * t - t;
            i += j;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = (w_plus - mean - 0.5) / var.sqrt();
        Normal::standard().sf(z)
    };
    Ok(PairedTestResult {
        kind: TestKind::Wilcoxon,
        statistic: w_plus,
        p_value,
        n,
    })
}

/// Both tests on per-seed scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTests {
    pub t_test: PairedTestResult,
    /// `None` when every difference is zero.
    pub wilcoxon: Option<PairedTestResult>,
}

pub fn paired_tests(baseline: &[f64], treated: &[f64]) -> Result<PairedTests> {
    if baseline.len() != treated.len() {
        return Err(Error::LengthMismatch {
            expected: baseline.len(),
            found: treated.len(),
        });
    }
    if baseline.len() < MIN_PAIRS {
        return Err(Error::TooFewSamples {
            needed: MIN_PAIRS,
            got: baseline.len(),
        });
    }
    let t_test = paired_t_test(baseline, treated)?;
    let wilcoxon = match wilcoxon_signed_rank(baseline, treated) {
        Ok(w) => Some(w),
        Err(Error::AllDifferencesZero) => None,
        Err(e) => return Err(e),
    };
    Ok(PairedTests { t_test, wilcoxon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn all_positive_six_pairs() {
        let base = [0.0; 6];
        let treated = [1.0; 6];
        let w = wilcoxon_signed_rank(&base, &treated).unwrap();
        assert_eq!(w.statistic, 21.0);
        assert_abs_diff_eq!(w.p_value, 1.0 / 64.0, epsilon = 1e-15);
    }

    #[test]
    fn null_distribution_sums_to_one() {
        for ranks in [
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![1.5, 1.5, 3.0, 4.5, 4.5, 6.0],
            (1..=25).map(f64::from).collect(),
        ] {
            let null = SignedRankNull::new(&ranks);
            let total: f64 = null.pmf().map(|(_, p)| p).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(null.upper_tail(0.0), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn small_null_by_enumeration() {
        // Ranks 1..4: W+ = 10 only for all-positive, W+ >= 9 also for {2,3,4}.
        let null = SignedRankNull::new(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(null.upper_tail(10.0), 1.0 / 16.0);
        assert_abs_diff_eq!(null.upper_tail(9.0), 2.0 / 16.0);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn wilcoxon_drops_zeros_and_rejects_all_zero() {
        let w = wilcoxon_signed_rank(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(w.n, 2);
        assert_eq!(
            wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::AllDifferencesZero)
        );
    }

    #[test]
    fn identical_samples_are_not_significant() {
        let x = [0.7, 0.8, 0.75, 0.9, 0.85];
        let r = paired_tests(&x, &x).unwrap();
        assert_eq!(r.t_test.p_value, 0.5);
        assert!(!r.t_test.is_significant());
        assert!(r.wilcoxon.is_none());
    }

    #[test]
    fn paired_tests_preconditions() {
        assert!(matches!(
            paired_tests(&[1.0; 4], &[2.0; 4]),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            paired_tests(&[1.0; 5], &[2.0; 6]),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
