//! Plug-in (maximum-likelihood) entropy and mutual information, in bits.

use std::collections::HashMap;

/// Contingency table between two discrete variables, with marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCounts {
    table: Vec<Vec<u64>>,
    row_totals: Vec<u64>,
    col_totals: Vec<u64>,
    total: u64,
}

impl JointCounts {
    /// Builds the table from paired observations. Values are relabeled to
    /// dense indices in order of first appearance.
    pub fn from_pairs(xs: &[usize], ys: &[usize]) -> Self {
        assert_eq!(xs.len(), ys.len(), "paired observations");
        let xi = dense_labels(xs);
        let yi = dense_labels(ys);
        let nx = xi.iter().max().map_or(0, |m| m + 1);
        let ny = yi.iter().max().map_or(0, |m| m + 1);
        let mut table = vec![vec![0u64; ny]; nx];
        for (&a, &b) in xi.iter().zip(&yi) {
            table[a][b] += 1;
        }
        JointCounts::from_table(table)
    }

    pub fn from_table(table: Vec<Vec<u64>>) -> Self {
        let ny = table.first().map_or(0, Vec::len);
        let row_totals: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
        let mut col_totals = vec![0u64; ny];
        for r in &table {
            assert_eq!(r.len(), ny, "ragged contingency table");
            for (c, v) in col_totals.iter_mut().zip(r) {
                *c += v;
            }
        }
        let total = row_totals.iter().sum();
        JointCounts {
            table,
            row_totals,
            col_totals,
            total,
        }
    }

    pub fn table(&self) -> &[Vec<u64>] {
        &self.table
    }

    pub fn row_totals(&self) -> &[u64] {
        &self.row_totals
    }

    pub fn col_totals(&self) -> &[u64] {
        &self.col_totals
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

fn dense_labels(xs: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    xs.iter()
        .map(|&x| {
            let next = map.len();
            *map.entry(x).or_insert(next)
        })
        .collect()
}

/// Entropy in bits of the empirical distribution given by `counts`
/// (zero counts contribute nothing).
pub fn entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Entropy in bits of a sequence of observations.
pub fn entropy_of(xs: &[usize]) -> f64 {
    let mut counts: HashMap<usize, u64> = HashMap::new();
    for &x in xs {
        *counts.entry(x).or_default() += 1;
    }
    let mut c: Vec<u64> = counts.into_values().collect();
    c.sort_unstable();
    entropy(&c)
}

/// `I(X;Y) = Σ p(x,y) log₂ p(x,y) / (p(x) p(y))`.
pub fn mutual_information(joint: &JointCounts) -> f64 {
    if joint.total == 0 {
        return 0.0;
    }
    let n = joint.total as f64;
    let mut mi = 0.0;
    for (r, row) in joint.table.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > 0 {
                let pxy = v as f64 / n;
                let px = joint.row_totals[r] as f64 / n;
                let py = joint.col_totals[c] as f64 / n;
                mi += pxy * (pxy / (px * py)).log2();
            }
        }
    }
    mi.max(0.0)
}

pub fn mutual_information_of(xs: &[usize], ys: &[usize]) -> f64 {
    mutual_information(&JointCounts::from_pairs(xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_four_way() {
        assert!((entropy(&[5, 5, 5, 5]) - 2.0).abs() < 1e-12);
        assert_eq!(entropy(&[7, 0, 0]), 0.0);
        assert_eq!(entropy(&[]), 0.0);
    }

    #[test]
    fn bijection_carries_full_entropy() {
        let xs = [0, 1, 2, 3, 0, 1, 2, 3];
        let ys = [3, 0, 2, 1, 3, 0, 2, 1];
        assert!((mutual_information_of(&xs, &ys) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn independent_product_table() {
        let j = JointCounts::from_table(vec![vec![2, 2, 2, 2]; 4]);
        assert!(mutual_information(&j).abs() < 1e-12);
        let j = JointCounts::from_table(vec![vec![1, 3], vec![2, 6]]);
        assert!(mutual_information(&j).abs() < 1e-12);
        assert_eq!(j.row_totals(), &[4, 8]);
        assert_eq!(j.col_totals(), &[3, 9]);
        assert_eq!(j.total(), 12);
    }

    #[test]
    fn mi_bounded_by_entropies() {
        let xs = [0, 0, 1, 1, 2, 2, 2, 3];
        let ys = [1, 0, 1, 1, 0, 0, 1, 1];
        let mi = mutual_information_of(&xs, &ys);
        assert!(mi <= entropy_of(&xs) + 1e-12);
        assert!(mi <= entropy_of(&ys) + 1e-12);
        assert!(mi >= 0.0);
    }
}
