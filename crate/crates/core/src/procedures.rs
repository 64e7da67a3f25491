//! Exceedance counts, ladder bins and the step-down rejection rule.
//!
//! Indices returned to callers are 1-based.

use serde::{Deserialize, Serialize};

use crate::calibration::ThresholdLadder;

/// `N = Σ I(X_i > t)`.
pub fn count_exceedances(series: &[f64], t: f64) -> usize {
    series.iter().filter(|&&x| x > t).count()
}

/// Increasing 1-based indices `i` with `X_i > t`.
pub fn exceedance_indices(series: &[f64], t: f64) -> Vec<usize> {
    series
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > t)
        .map(|(i, _)| i + 1)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCounts {
    /// Strict exceedances of `t_1`.
    pub n: usize,
    /// `N_i = #{j : t_i ≤ X_j < t_{i−1}}`, `t_0 = ∞`.
    pub bins: Vec<usize>,
    /// `N^(i) = N_1 + … + N_i`.
    pub cumulative: Vec<usize>,
}

/// Bin counts against a ladder.
pub fn bin_counts(series: &[f64], ladder: &ThresholdLadder) -> TestCounts {
    let t = &ladder.thresholds;
    let mut bins = vec![0usize; t.len()];
    for &x in series {
        // first rung with t_i <= x; thresholds are decreasing
        let i = t.partition_point(|&ti| ti > x);
        if i < t.len() {
            bins[i] += 1;
        }
    }
    let cumulative = bins
        .iter()
        .scan(0, |acc, &b| {
            *acc += b;
            Some(*acc)
        })
        .collect();
    TestCounts {
        n: count_exceedances(series, t[0]),
        bins,
        cumulative,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionResult {
    pub k_star: usize,
    /// 1-based indices of the rejected tests, largest statistic first.
    pub rejected: Vec<usize>,
}

/// Rejects the `k*` largest statistics, `k*` the largest `k` for which the
/// `i`-th largest exceeds `t_i` for every `i ≤ k`. Equal statistics are ranked
/// by lower index first.
pub fn stepdown_reject(series: &[f64], ladder: &ThresholdLadder) -> RejectionResult {
    let t = &ladder.thresholds;
    let mut cand: Vec<usize> = (0..series.len()).filter(|&i| series[i] > t[t.len() - 1]).collect();
    cand.sort_by(|&a, &b| series[b].total_cmp(&series[a]).then(a.cmp(&b)));
    let k_star = cand
        .iter()
        .zip(t)
        .take_while(|(&i, &ti)| series[i] > ti)
        .count();
    RejectionResult {
        k_star,
        rejected: cand[..k_star].iter().map(|i| i + 1).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(t: &[f64]) -> ThresholdLadder {
        ThresholdLadder::from_thresholds(t.to_vec()).unwrap()
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_exceedances(&[1.0, 2.0, 3.0], 2.0), 1);
        assert_eq!(count_exceedances(&[1.0, 2.0, 3.0], f64::INFINITY), 0);
        assert_eq!(count_exceedances(&[2.0, 2.0, 2.0], 2.0), 0);
    }

    #[test]
    fn index_examples() {
        assert_eq!(exceedance_indices(&[5.0, 1.0, 6.0], 4.0), vec![1, 3]);
        assert!(exceedance_indices(&[5.0, 1.0, 6.0], 9.0).is_empty());
    }

    #[test]
    fn bin_examples() {
        let l = ladder(&[3.0, 2.0, 1.0]);
        let c = bin_counts(&[3.5, 2.5, 1.5, 0.5], &l);
        assert_eq!(c.bins, vec![1, 1, 1]);
        assert_eq!(c.cumulative, vec![1, 2, 3]);
        assert_eq!(c.n, 1);
        let c = bin_counts(&[2.0], &l);
        assert_eq!(c.bins, vec![0, 1, 0]);
        // exactly t_1 lands in bin 1 but is not an exceedance of t_1
        let c = bin_counts(&[3.0], &l);
        assert_eq!((c.n, c.bins[0]), (0, 1));
    }

    #[test]
    fn stepdown_examples() {
        let l = ladder(&[3.0, 2.0, 1.0]);
        let r = stepdown_reject(&[3.5, 2.5, 0.5, 0.2], &l);
        assert_eq!(r.k_star, 2);
        assert_eq!(r.rejected, vec![1, 2]);
        let r = stepdown_reject(&[0.5, 2.9], &l);
        assert_eq!(r.k_star, 0);
        assert!(r.rejected.is_empty());
        let r = stepdown_reject(&[3.5, 3.5, 3.5], &ladder(&[3.0, 2.0]));
        assert_eq!(r.rejected, vec![1, 2]);
    }
}
