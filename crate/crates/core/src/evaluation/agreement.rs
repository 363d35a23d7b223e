//! Cluster-size balance and agreement between labellings.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, invalid_shape, Result};

/// Fraction of `n` below which a cluster counts as small.
pub const SMALL_CLUSTER_FRAC: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    /// Largest cluster size over `n`.
    pub dominant_ratio: f64,
    /// Population standard deviation of the `k` cluster sizes.
    pub size_std: f64,
    /// Clusters (empty ones included) holding under 1% of the samples.
    pub n_small: usize,
}

pub fn balance_from_sizes(sizes: &[usize]) -> Result<Balance> {
    let n: usize = sizes.iter().sum();
    if sizes.is_empty() || n == 0 {
        return Err(invalid_param("balance needs at least one non-empty cluster"));
    }
    let k = sizes.len() as f64;
    let mean = n as f64 / k;
    let var = sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / k;
    Ok(Balance {
        dominant_ratio: *sizes.iter().max().expect("non-empty") as f64 / n as f64,
        size_std: var.sqrt(),
        n_small: sizes.iter().filter(|&&s| (s as f64) < SMALL_CLUSTER_FRAC * n as f64).count(),
    })
}

pub fn balance_diagnostics(labels: &[usize], k: usize) -> Result<Balance> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(invalid_param(format!("label {bad} out of range for k = {k}")));
    }
    balance_from_sizes(&crate::clustering::cluster_sizes(labels, k))
}

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Pair-counting agreement corrected for chance; 1 for identical partitions.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid_shape(format!("labellings have lengths {} and {}", a.len(), b.len())));
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    let (mut rows, mut cols) = (vec![0u64; ka], vec![0u64; kb]);
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let index: f64 = table.iter().map(|&c| pairs(c)).sum();
    let sa: f64 = rows.iter().map(|&c| pairs(c)).sum();
    let sb: f64 = cols.iter().map(|&c| pairs(c)).sum();
    let total = pairs(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = (sa + sb) / 2.0;
    if max == expected {
        // Both partitions trivial (all-in-one or all singletons).
        return Ok(if sa == sb { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_fixture() {
        let b = balance_from_sizes(&[1562, 488, 466, 440, 353, 313, 305]).unwrap();
        assert!((b.dominant_ratio * 100.0 - 39.8).abs() < 0.05);
        assert!((b.size_std - 414.3).abs() < 0.1);
        assert_eq!(b.n_small, 0);
    }

    #[test]
    fn balanced_and_small() {
        let b = balance_diagnostics(&(0..40).map(|i| i % 4).collect::<Vec<_>>(), 4).unwrap();
        assert_eq!((b.dominant_ratio, b.size_std), (0.25, 0.0));
        let labels: Vec<usize> = (0..1000).map(|i| usize::from(i < 3)).collect();
        assert_eq!(balance_diagnostics(&labels, 2).unwrap().n_small, 1);
    }

    #[test]
    fn ari_basics() {
        let a = [0, 0, 1, 1, 2, 2];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&a, &[2, 2, 0, 0, 1, 1]).unwrap(), 1.0);
        assert!(adjusted_rand_index(&a, &[0, 1]).is_err());
        let v = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert!((v + 0.5).abs() < 1e-12, "{v}");
    }
}
