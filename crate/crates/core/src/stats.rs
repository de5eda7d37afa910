//! Rank correlation, descriptive aggregates and significance masking.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Two-sided significance threshold used when masking correlation tables.
pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

/// Below this sample size p-values come from an exact permutation test.
pub const EXACT_P_VALUE_BELOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    /// `p_value < SIGNIFICANCE_LEVEL`.
    pub significant: bool,
}

/// Ranks starting at 1, ties receiving the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean of i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ with average-rank ties and a two-sided p-value.
///
/// Returns [`Error::Undefined`] when either series is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult> {
    if xs.len() != ys.len() {
        return Err(Error::Argument(format!(
            "spearman: lengths differ ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::Undefined(format!("spearman needs at least 3 pairs, got {n}")));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let rho = pearson(&rx, &ry)
        .ok_or_else(|| Error::Undefined("spearman: a series has no variance".into()))?;
    let p_value = if n < EXACT_P_VALUE_BELOW {
        exact_permutation_p(&rx, &ry, rho)
    } else {
        t_approximation_p(rho, n)
    };
    Ok(CorrelationResult {
        rho,
        p_value,
        n,
        significant: p_value < SIGNIFICANCE_LEVEL,
    })
}

/// Two-sided p from `t = ρ √((n−2)/(1−ρ²))` on n−2 degrees of freedom.
pub fn t_approximation_p(rho: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = rho * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Fraction of all orderings of `ry` whose |ρ| reaches the observed |ρ|.
fn exact_permutation_p(rx: &[f64], ry: &[f64], rho: f64) -> f64 {
    let target = rho.abs() - 1e-12;
    let mut perm = ry.to_vec();
    let mut hits = 0u64;
    let mut total = 0u64;
    heap_permutations(&mut perm, &mut |p| {
        total += 1;
        if pearson(rx, p).map_or(false, |r| r.abs() >= target) {
            hits += 1;
        }
    });
    hits as f64 / total as f64
}

fn heap_permutations(xs: &mut [f64], visit: &mut impl FnMut(&[f64])) {
    let n = xs.len();
    let mut c = vec![0usize; n];
    visit(xs);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                xs.swap(0, i);
            } else {
                xs.swap(c[i], i);
            }
            visit(xs);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Sample standard deviation (n−1 denominator).
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Standard error of the mean.
pub fn sem(xs: &[f64]) -> Result<f64> {
    sample_sd(xs)
        .map(|sd| sd / (xs.len() as f64).sqrt())
        .ok_or_else(|| Error::Undefined(format!("sem needs at least 2 values, got {}", xs.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn perfect_and_inverse() {
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 5.0, 9.0, 20.0]).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-15);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert!((r.rho + 1.0).abs() < 1e-15);
        // Exact test: 2 of the 24 orderings reach |ρ| = 1.
        assert!((r.p_value - 2.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_three_points() {
        // ranks (1,2,3) vs (2,1,3): d² = 1+1+0 = 2, ρ = 1 − 6·2/(3·8) = 0.5
        let r = spearman(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap();
        assert!((r.rho - 0.5).abs() < 1e-12);
        // Every ordering of three distinct ranks has |ρ| ∈ {0.5, 1}.
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_undefined() {
        assert!(matches!(
            spearman(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0]),
            Err(Error::Undefined(_))
        ));
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::Undefined(_))));
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn t_approximation_large_n() {
        let xs: Vec<f64> = (0..30).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 0.37).sin() + x * 0.05).collect();
        let r = spearman(&xs, &ys).unwrap();
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        assert_eq!(r.significant, r.p_value < 0.01);
    }

    #[test]
    fn symmetric_and_monotone_invariant() {
        let xs = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0];
        let ys = [2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0, 2.0, 8.0, 4.0];
        let a = spearman(&xs, &ys).unwrap();
        let b = spearman(&ys, &xs).unwrap();
        assert!((a.rho - b.rho).abs() < 1e-15);
        let ex: Vec<f64> = xs.iter().map(|x| x.exp() * 3.0 - 1.0).collect();
        let c = spearman(&ex, &ys).unwrap();
        assert!((a.rho - c.rho).abs() < 1e-15);
    }

    #[test]
    fn sem_cases() {
        assert_eq!(sem(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((sem(&[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(sem(&[1.0]), Err(Error::Undefined(_))));
        let xs = [0.3, 1.9, 2.2, 5.0];
        let scaled: Vec<f64> = xs.iter().map(|x| x * 4.0).collect();
        assert!((sem(&scaled).unwrap() - 4.0 * sem(&xs).unwrap()).abs() < 1e-12);
    }
}
