//! Dynamic time warping and a k-medoids clusterer over DTW distances.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::clustering::{Centroids, ClusterMode, ClusteringResult};
use crate::error::{invalid_input, invalid_param, Result};
use crate::rng::{stream_rng, STREAM_KMEANS};
use crate::windowing::{resample_linear, TimeSeries};

/// Iteration cap of the medoid alternation.
pub const KMEDOIDS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtwResult {
    pub distance: f64,
    /// Cells on the optimal alignment path.
    pub path_length: usize,
}

/// Unconstrained DTW with `|a − b|` local cost and unit steps. Among
/// equal-cost paths the shortest is reported.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<DtwResult> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid_input("DTW needs two non-empty sequences"));
    }
    let m = b.len();
    let mut prev: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); m + 1];
    let mut cur = prev.clone();
    prev[0] = (0.0, 0);
    for &x in a {
        cur[0] = (f64::INFINITY, 0);
        for j in 1..=m {
            let cost = (x - b[j - 1]).abs();
            let best = [prev[j - 1], prev[j], cur[j - 1]]
                .into_iter()
                .min_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)))
                .expect("three candidates");
            cur[j] = (best.0 + cost, best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (distance, path_length) = prev[m];
    Ok(DtwResult { distance, path_length })
}

/// Symmetric matrix of pairwise DTW distances, row-major.
pub fn dtw_matrix(series: &[&[f64]]) -> Result<Vec<f64>> {
    let n = series.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = dtw_distance(series[i], series[j])?.distance;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Ok(d)
}

fn seed_medoids(d: &[f64], n: usize, k: usize, rng: &mut crate::rng::Rng) -> Vec<usize> {
    let mut medoids = vec![rng.random_range(0..n)];
    while medoids.len() < k {
        let gap: Vec<f64> = (0..n)
            .map(|i| {
                if medoids.contains(&i) {
                    0.0
                } else {
                    medoids.iter().map(|&m| d[i * n + m]).fold(f64::INFINITY, f64::min).powi(2)
                }
            })
            .collect();
        let total: f64 = gap.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = gap.iter().rposition(|&g| g > 0.0).expect("positive total");
            for (i, &g) in gap.iter().enumerate() {
                acc += g;
                if g > 0.0 && acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !medoids.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        medoids.push(pick);
    }
    medoids
}

fn assign(d: &[f64], n: usize, medoids: &[usize]) -> Vec<usize> {
    (0..n)
        .map(|i| {
            if let Some(own) = medoids.iter().position(|&m| m == i) {
                return own;
            }
            medoids
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (c, &m)| if d[i * n + m] < best.1 { (c, d[i * n + m]) } else { best })
                .0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMedoidsOutcome {
    pub result: ClusteringResult<f64>,
    /// Sum of DTW distances from each series to its medoid.
    pub cost: f64,
    pub iterations: usize,
}

/// k-medoids on the DTW distance matrix: seeded ++-style on DTW distances,
/// then alternating assignment and per-cluster medoid updates until the
/// medoids stop changing. Centroids hold the medoid series, resampled to
/// the longest input length when lengths differ.
pub fn kmedoids_dtw(series: &[TimeSeries], k: usize, seed: u64) -> Result<KMedoidsOutcome> {
    let n = series.len();
    if k == 0 || n < k {
        return Err(invalid_param(format!("k-medoids needs 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    let views: Vec<&[f64]> = series.iter().map(|s| s.values.as_slice()).collect();
    let d = dtw_matrix(&views)?;
    let mut rng = stream_rng(seed, STREAM_KMEANS);
    let mut medoids = seed_medoids(&d, n, k, &mut rng);
    let mut labels = assign(&d, n, &medoids);
    let mut iterations = 0;
    while iterations < KMEDOIDS_MAX_ITER {
        iterations += 1;
        let next: Vec<usize> = (0..k)
            .map(|c| {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                members
                    .iter()
                    .map(|&m| (m, members.iter().map(|&i| d[i * n + m]).sum::<f64>()))
                    .fold((medoids[c], f64::INFINITY), |best, (m, cost)| if cost < best.1 { (m, cost) } else { best })
                    .0
            })
            .collect();
        if next == medoids {
            break;
        }
        medoids = next;
        labels = assign(&d, n, &medoids);
    }
    let cost = (0..n).map(|i| d[i * n + medoids[labels[i]]]).sum();
    let len = series.iter().map(TimeSeries::len).max().expect("n ≥ 1");
    let mut centres = Vec::with_capacity(k * len);
    for &m in &medoids {
        if series[m].len() == len {
            centres.extend_from_slice(&series[m].values);
        } else if series[m].len() == 1 {
            centres.extend(std::iter::repeat_n(series[m].values[0], len));
        } else {
            centres.extend(resample_linear(&series[m], len)?.values);
        }
    }
    let mut result = ClusteringResult::new(
        labels,
        k,
        ClusterMode::HardC2,
        Centroids::new(k, len, centres)?,
        seed,
        "kmedoids_dtw",
    )?;
    result.medoids = Some(medoids);
    Ok(KMedoidsOutcome { result, cost, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dtw_fixtures() {
        assert_eq!(dtw_distance(&[0.0, 0.0, 1.0], &[0.0, 1.0]).unwrap().distance, 0.0);
        let a = [1.0, 3.0, 2.0, 5.0];
        let r = dtw_distance(&a, &a).unwrap();
        assert_eq!((r.distance, r.path_length), (0.0, 4));
        assert!(dtw_distance(&[], &a).is_err());
        let b = [2.0, 2.5, 0.0];
        assert_eq!(dtw_distance(&a, &b).unwrap().distance, dtw_distance(&b, &a).unwrap().distance);
    }

    fn ts(id: usize, v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(format!("s{id}"), v).unwrap()
    }

    #[test]
    fn k_equals_n() {
        let set: Vec<TimeSeries> = (0..4).map(|i| ts(i, vec![i as f64, 2.0 * i as f64, 1.0])).collect();
        let out = kmedoids_dtw(&set, 4, 3).unwrap();
        assert_eq!(out.cost, 0.0);
        let mut m = out.result.medoids.clone().unwrap();
        m.sort();
        assert_eq!(m, vec![0, 1, 2, 3]);
    }

    #[test]
    fn ramps_versus_dips() {
        let ramp = |shift: usize| -> Vec<f64> { (0..30).map(|t| ((t + shift) as f64 / 30.0).min(1.0)).collect() };
        let dip = |shift: usize| -> Vec<f64> {
            (0..30)
                .map(|t| {
                    let base = ((t + shift) as f64 / 30.0).min(1.0);
                    if (12..18).contains(&t) { base - 0.6 } else { base }
                })
                .collect()
        };
        let mut set = Vec::new();
        for s in 0..4 {
            set.push(ts(set.len(), ramp(s)));
            set.push(ts(set.len(), dip(s)));
        }
        let a = kmedoids_dtw(&set, 2, 1).unwrap();
        let truth: Vec<usize> = (0..8).map(|i| i % 2).collect();
        assert_eq!(crate::evaluation::adjusted_rand_index(&a.result.labels, &truth).unwrap(), 1.0);
        assert_eq!(a.result, kmedoids_dtw(&set, 2, 1).unwrap().result);
    }
}
