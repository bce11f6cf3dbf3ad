//! Nonparametric two-sample comparison (Mann–Whitney U, two-sided).
//!
//! U is computed from midranks, so ties are handled exactly. Small pooled
//! samples (n + m ≤ 20) get an exact permutation p-value conditioned on the
//! observed value pattern; larger ones use the normal approximation with
//! tie-corrected variance and a 0.5 continuity correction.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Pooled sample sizes up to this bound use the exact permutation test.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("both samples must be non-empty")]
    EmptySample,
    #[error("samples must be finite")]
    NonFiniteSample,
}

/// Result of comparing sample A against sample B.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    /// U statistic of sample A (number of (a, b) pairs with a > b, ties
    /// counting one half).
    pub u_statistic: f64,
    /// Two-sided p-value: the probability, under random group assignment,
    /// of a U at least as far from n·m/2 as observed.
    pub p_value: f64,
    pub medians: (f64, f64),
    pub n_samples: (usize, usize),
}

fn median(sample: &[f64]) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

/// Counts size-`left` subsets of `two_ranks[start..]`, and how many of them
/// (together with `acc` rank mass already taken) deviate from the center by
/// at least `dev`. Everything is in doubled-rank units so all arithmetic is
/// integral.
fn count_tails(
    two_ranks: &[i64],
    start: usize,
    left: usize,
    acc: i64,
    base: i64,
    center: i64,
    dev: i64,
) -> (u64, u64) {
    if left == 0 {
        let two_u = acc - base;
        return (1, u64::from((two_u - center).abs() >= dev));
    }
    if two_ranks.len() - start < left {
        return (0, 0);
    }
    let (t_in, h_in) = count_tails(
        two_ranks,
        start + 1,
        left - 1,
        acc + two_ranks[start],
        base,
        center,
        dev,
    );
    let (t_out, h_out) = count_tails(two_ranks, start + 1, left, acc, base, center, dev);
    (t_in + t_out, h_in + h_out)
}

/// Two-sided Mann–Whitney U test of `a` against `b`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<ComparisonResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteSample);
    }
    let n = a.len();
    let m = b.len();
    let total = n + m;

    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite samples"));

    // Doubled midranks: a tie group spanning sorted positions i..=j
    // (0-based) has midrank (i + j + 2) / 2, so twice that is integral.
    let mut two_ranks = vec![0i64; total];
    let mut tie_sum = 0.0; // Σ (t³ − t) over tie groups
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let group = (j - i + 1) as f64;
        tie_sum += group * group * group - group;
        for k in i..=j {
            two_ranks[k] = (i + j + 2) as i64;
        }
        i = j + 1;
    }

    let two_rank_sum_a: i64 = two_ranks
        .iter()
        .zip(&pooled)
        .filter(|(_, (_, from_a))| *from_a)
        .map(|(&tr, _)| tr)
        .sum();
    let base = (n * (n + 1)) as i64;
    let center = (n * m) as i64; // doubled mean: 2 · nm/2
    let two_u = two_rank_sum_a - base;
    let u = two_u as f64 / 2.0;

    let p_value = if total <= EXACT_LIMIT {
        let dev = (two_u - center).abs();
        let (subsets, hits) = count_tails(&two_ranks, 0, n, 0, base, center, dev);
        hits as f64 / subsets as f64
    } else {
        let nm = (n * m) as f64;
        let total_f = total as f64;
        let variance =
            nm / 12.0 * (total_f + 1.0 - tie_sum / (total_f * (total_f - 1.0)));
        if variance <= 0.0 {
            1.0 // every pooled value tied: U is exactly nm/2
        } else {
            let z = ((u - nm / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
            let standard = Normal::new(0.0, 1.0).expect("unit normal");
            (2.0 * (1.0 - standard.cdf(z))).clamp(f64::MIN_POSITIVE, 1.0)
        }
    };

    Ok(ComparisonResult {
        u_statistic: u,
        p_value,
        medians: (median(a), median(b)),
        n_samples: (n, m),
    })
}
