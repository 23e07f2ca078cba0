//! Paired two-sided Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest non-zero sample size handled by the exact null distribution.
pub const EXACT_MAX_N: usize = 15;
pub const MIN_N: usize = 5;
pub const SIGNIFICANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W−)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    /// Differences left after dropping zeros.
    pub n: usize,
    pub exact: bool,
    pub significant: bool,
}

/// Average ranks of `|d|`, doubled so they are integers.
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // positions i..=j get rank (i + 1 + j + 1) / 2
        let r2 = (i + j + 2) as u64;
        for &o in &order[i..=j] {
            ranks[o] = r2;
        }
        i = j + 1;
    }
    ranks
}

/// `P(W+ ≤ w2 / 2)` under the null, counting subsets of the doubled ranks.
fn exact_lower_tail(ranks2: &[u64], w2: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut ways = vec![0f64; total as usize + 1];
    ways[0] = 1.0;
    for &r in ranks2 {
        let r = r as usize;
        for s in (r..ways.len()).rev() {
            ways[s] += ways[s - r];
        }
    }
    let hits: f64 = ways[..=(w2 as usize).min(total as usize)].iter().sum();
    hits / 2f64.powi(ranks2.len() as i32)
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(Error::DegenerateSample("all differences are zero".into()));
    }
    let n = d.len();
    if n < MIN_N {
        return Err(Error::DegenerateSample(format!(
            "{n} non-zero differences, need at least {MIN_N}"
        )));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks2 = doubled_ranks(&abs);
    let plus2: u64 = d.iter().zip(&ranks2).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total2: u64 = ranks2.iter().sum();
    let minus2 = total2 - plus2;
    let w2 = plus2.min(minus2);
    let exact = n <= EXACT_MAX_N;
    let p_value = if exact {
        (2.0 * exact_lower_tail(&ranks2, w2)).min(1.0)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut ties = 0.0;
        let mut sorted = ranks2.clone();
        sorted.sort_unstable();
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
            let t = j as f64;
            ties += t * t * t - t;
            i += j;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        let w = w2 as f64 / 2.0;
        let dev = ((w - mean).abs() - 0.5).max(0.0);
        let z = dev / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.cdf(-z)).min(1.0)
    };
    Ok(WilcoxonResult {
        statistic: w2 as f64 / 2.0,
        w_plus: plus2 as f64 / 2.0,
        w_minus: minus2 as f64 / 2.0,
        p_value,
        n,
        exact,
        significant: p_value < SIGNIFICANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_five() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.0625).abs() < 1e-15);
        assert!(r.exact && r.significant);
    }

    #[test]
    fn equal_samples_are_degenerate() {
        let a = [0.9, 0.8, 0.7, 0.95, 0.85];
        let e = wilcoxon_signed_rank(&a, &a).unwrap_err();
        assert!(e.to_string().contains("degenerate paired sample"));
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(doubled_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![2, 5, 5, 8]);
    }

    #[test]
    fn large_sample_uses_normal() {
        let a: Vec<f64> = (0..30).map(|i| 0.9 + 0.001 * i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| 0.85 + 0.0017 * ((i * 7) % 30) as f64).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(!r.exact);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }
}
