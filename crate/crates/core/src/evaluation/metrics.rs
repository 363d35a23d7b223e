//! Internal validity indices. Inputs are cast to `f64`; distances are Euclidean.

use crate::error::{invalid_param, invalid_shape, Result};
use crate::nn::Tensor;
use crate::Scalar;

/// Rows of `x` as `f64` with labels remapped to `0..k` in first-seen order of
/// the sorted distinct labels.
pub(crate) struct Labelled {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub k: usize,
}

pub(crate) fn prepare<T: Scalar>(x: &Tensor<T>, labels: &[usize]) -> Result<Labelled> {
    if x.shape().len() != 2 {
        return Err(invalid_shape(format!("expected an n×d matrix, got {:?}", x.shape())));
    }
    if x.rows() != labels.len() {
        return Err(invalid_shape(format!("{} rows but {} labels", x.rows(), labels.len())));
    }
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let remap = |l: usize| distinct.binary_search(&l).expect("label present");
    Ok(Labelled {
        points: (0..x.rows()).map(|i| x.row(i).iter().map(|v| v.as_f64()).collect()).collect(),
        labels: labels.iter().map(|&l| remap(l)).collect(),
        k: distinct.len(),
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn centroids(l: &Labelled) -> (Vec<Vec<f64>>, Vec<usize>) {
    let d = l.points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; d]; l.k];
    let mut counts = vec![0usize; l.k];
    for (p, &c) in l.points.iter().zip(&l.labels) {
        counts[c] += 1;
        sums[c].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= c as f64);
    }
    (sums, counts)
}

fn require_k(l: &Labelled, max: usize, what: &str) -> Result<()> {
    if l.k < 2 || l.k > max {
        return Err(invalid_param(format!(
            "{what} needs between 2 and {max} clusters, got {}",
            l.k
        )));
    }
    Ok(())
}

/// Mean silhouette width; members of singleton clusters score 0.
pub fn silhouette<T: Scalar>(x: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let l = prepare(x, labels)?;
    let n = l.points.len();
    require_k(&l, n.saturating_sub(1), "silhouette")?;
    let counts = centroids(&l).1;
    let mut total = 0.0;
    let mut sums = vec![0.0; l.k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[l.labels[j]] += dist(&l.points[i], &l.points[j]);
            }
        }
        let own = l.labels[i];
        if counts[own] == 1 {
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = (0..l.k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// Between- over within-cluster dispersion, each per degree of freedom.
/// Zero within-cluster dispersion gives `+∞`.
pub fn calinski_harabasz<T: Scalar>(x: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let l = prepare(x, labels)?;
    let n = l.points.len();
    require_k(&l, n.saturating_sub(1), "Calinski-Harabasz")?;
    let (cents, counts) = centroids(&l);
    let d = cents[0].len();
    let mut mean = vec![0.0; d];
    for p in &l.points {
        mean.iter_mut().zip(p).for_each(|(m, v)| *m += v / n as f64);
    }
    let between: f64 = cents
        .iter()
        .zip(&counts)
        .map(|(c, &m)| m as f64 * dist(c, &mean).powi(2))
        .sum();
    let within: f64 = l
        .points
        .iter()
        .zip(&l.labels)
        .map(|(p, &c)| dist(p, &cents[c]).powi(2))
        .sum();
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((between / (l.k - 1) as f64) / (within / (n - l.k) as f64))
}

/// Mean over clusters of the worst scatter-to-separation ratio. Coincident
/// centroids give `+∞`.
pub fn davies_bouldin<T: Scalar>(x: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let l = prepare(x, labels)?;
    require_k(&l, usize::MAX, "Davies-Bouldin")?;
    let (cents, counts) = centroids(&l);
    let mut scatter = vec![0.0; l.k];
    for (p, &c) in l.points.iter().zip(&l.labels) {
        scatter[c] += dist(p, &cents[c]);
    }
    scatter.iter_mut().zip(&counts).for_each(|(s, &c)| *s /= c as f64);
    let mut total = 0.0;
    for i in 0..l.k {
        let mut worst = 0.0f64;
        for j in (0..l.k).filter(|&j| j != i) {
            let sep = dist(&cents[i], &cents[j]);
            if sep == 0.0 {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    Ok(total / l.k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: &[f64]) -> Tensor<f64> {
        Tensor::matrix(v.len(), 1, v).unwrap()
    }

    #[test]
    fn hand_fixtures() {
        let s = silhouette(&line(&[0.0, 1.0, 9.0, 10.0]), &[0, 0, 1, 1]).unwrap();
        assert!((s - 0.8886).abs() < 1e-4, "{s}");
        let ch = calinski_harabasz(&line(&[0.0, 1.0, 10.0, 11.0]), &[0, 0, 1, 1]).unwrap();
        assert!((ch - 200.0).abs() < 1e-9);
        let db = davies_bouldin(&line(&[0.0, 1.0, 10.0, 11.0]), &[0, 0, 1, 1]).unwrap();
        assert!((db - 0.1).abs() < 1e-12);
    }

    #[test]
    fn tight_clusters_score_one() {
        assert_eq!(silhouette(&line(&[2.0, 2.0, 7.0, 7.0]), &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(calinski_harabasz(&line(&[2.0, 2.0, 7.0, 7.0]), &[0, 0, 1, 1]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn coincident_centroids() {
        let db = davies_bouldin(&line(&[-1.0, 1.0, -2.0, 2.0]), &[0, 0, 1, 1]).unwrap();
        assert_eq!(db, f64::INFINITY);
    }

    #[test]
    fn translation_invariant_ch() {
        let a = calinski_harabasz(&line(&[0.0, 1.5, 4.0, 9.0, 10.0]), &[0, 0, 1, 2, 2]).unwrap();
        let b = calinski_harabasz(&line(&[100.0, 101.5, 104.0, 109.0, 110.0]), &[0, 0, 1, 2, 2]).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn cluster_count_range() {
        assert!(silhouette(&line(&[0.0, 1.0]), &[0, 1]).is_err());
        assert!(davies_bouldin(&line(&[0.0, 1.0]), &[3, 3]).is_err());
        // Arbitrary label values are fine.
        assert!(silhouette(&line(&[0.0, 1.0, 5.0]), &[7, 7, 2]).is_ok());
    }
}
