//! Two-sided Wilcoxon rank-sum (Mann-Whitney) test.

use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSum {
    /// Sum of the mid-ranks of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Mid-ranks (1-based) of the pooled sample `a ++ b`.
pub fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // Positions start..end share ranks start+1..=end.
        let mid = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = mid;
        }
        start = end;
    }
    ranks
}

fn pooled(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().chain(b).copied().collect()
}

/// Exact permutation p-value, conditional on the observed ties.
///
/// Counts every size-`|a|` subset of the pooled doubled mid-ranks by its sum
/// and accumulates the mass at least as far from the null mean as observed.
pub fn wilcoxon_exact(a: &[f64], b: &[f64]) -> RankSum {
    let n = a.len();
    let ranks = midranks(&pooled(a, b));
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: number of k-subsets of the processed items with doubled sum s.
    let mut counts = vec![vec![0f64; max_sum + 1]; n + 1];
    counts[0][0] = 1.0;
    for &d in &doubled {
        for k in (1..=n).rev() {
            let (lower, upper) = counts.split_at_mut(k);
            let (prev, cur) = (&lower[k - 1], &mut upper[0]);
            for s in (d..=max_sum).rev() {
                cur[s] += prev[s - d];
            }
        }
    }
    let total: f64 = counts[n].iter().sum();
    let observed: usize = doubled[..n].iter().sum();
    let n_all = ranks.len();
    let mean2 = (n * (n_all + 1)) as i64;
    let dev = (observed as i64 - mean2).abs();
    let extreme: f64 = counts[n]
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as i64 - mean2).abs() >= dev)
        .map(|(_, c)| c)
        .sum();
    RankSum {
        statistic: observed as f64 / 2.0,
        p_value: (extreme / total).min(1.0),
        exact: true,
    }
}

/// Normal approximation with tie-corrected variance and continuity correction.
pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> RankSum {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let all = pooled(a, b);
    let ranks = midranks(&all);
    let w: f64 = ranks[..a.len()].iter().sum();
    let big_n = n + m;
    let mean = n * (big_n + 1.0) / 2.0;
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * m / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - normal.cdf(z))).min(1.0)
    };
    RankSum {
        statistic: w,
        p_value,
        exact: false,
    }
}

/// Exact when the smaller sample has at most 8 values and both together at
/// most 16; normal approximation otherwise.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> RankSum {
    assert!(!a.is_empty() && !b.is_empty(), "rank-sum test needs two non-empty samples");
    if a.len().min(b.len()) <= 8 && a.len() + b.len() <= 16 {
        wilcoxon_exact(a, b)
    } else {
        wilcoxon_normal(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn separated_triples() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert!(r.exact);
        assert_eq!(r.statistic, 6.0);
        assert!((r.p_value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_samples() {
        let a = [0.3, 1.2, -0.4, 2.2, 0.9];
        assert!(wilcoxon_rank_sum(&a, &a).p_value >= 0.99);
        let big: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        assert!(wilcoxon_rank_sum(&big, &big).p_value >= 0.99);
    }

    #[test]
    fn all_tied_has_unit_p() {
        assert_eq!(wilcoxon_exact(&[1.0, 1.0], &[1.0, 1.0, 1.0]).p_value, 1.0);
        assert_eq!(wilcoxon_normal(&[1.0; 10], &[1.0; 12]).p_value, 1.0);
    }
}
