//! Lloyd's algorithm with k-means++ seeding and restarts.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{sq_dist, Centroids, ClusterMode, ClusteringResult};
use crate::error::{invalid_param, invalid_shape, Result};
use crate::nn::Tensor;
use crate::rng::{stream_rng, Rng, STREAM_KMEANS};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on the largest centroid displacement.
    pub tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutcome<T> {
    pub labels: Vec<usize>,
    pub centroids: Centroids<T>,
    pub inertia: T,
    /// Lloyd iterations of the kept restart.
    pub iterations: usize,
}

struct Points<'a, T> {
    data: &'a [T],
    n: usize,
    d: usize,
}

impl<T: Scalar> Points<'_, T> {
    fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

/// Index of the nearest centre; ties go to the lower index.
fn nearest<T: Scalar>(p: &[T], centres: &[T], d: usize) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (j, c) in centres.chunks_exact(d).enumerate() {
        let dist = sq_dist(p, c);
        if dist < best.1 {
            best = (j, dist);
        }
    }
    best
}

fn plus_plus<T: Scalar>(pts: &Points<T>, k: usize, rng: &mut Rng) -> Vec<T> {
    let mut centres = Vec::with_capacity(k * pts.d);
    centres.extend_from_slice(pts.row(rng.random_range(0..pts.n)));
    let mut d2: Vec<f64> = (0..pts.n).map(|i| sq_dist(pts.row(i), &centres[..pts.d]).as_f64()).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = pts.n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            // Rounding can leave `chosen` on an already-used point.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..pts.n)
        };
        let start = centres.len();
        centres.extend_from_slice(pts.row(pick));
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(pts.row(i), &centres[start..]).as_f64());
        }
    }
    centres
}

fn assign<T: Scalar>(pts: &Points<T>, centres: &[T], labels: &mut [usize], dists: &mut [T]) {
    for i in 0..pts.n {
        let (j, d) = nearest(pts.row(i), centres, pts.d);
        labels[i] = j;
        dists[i] = d;
    }
}

/// Gives every empty cluster the point farthest from its current centre,
/// taken from clusters that can spare one.
fn repair_empty<T: Scalar>(labels: &mut [usize], dists: &mut [T], k: usize) -> bool {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut changed = false;
    for j in 0..k {
        if sizes[j] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            });
        if let Some(i) = donor {
            sizes[labels[i]] -= 1;
            sizes[j] = 1;
            labels[i] = j;
            dists[i] = T::zero();
            changed = true;
        }
    }
    changed
}

fn means<T: Scalar>(pts: &Points<T>, labels: &[usize], k: usize, previous: &[T]) -> Vec<T> {
    let mut sums = vec![T::zero(); k * pts.d];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, &v) in sums[l * pts.d..(l + 1) * pts.d].iter_mut().zip(pts.row(i)) {
            *s += v;
        }
    }
    for j in 0..k {
        let block = &mut sums[j * pts.d..(j + 1) * pts.d];
        if counts[j] == 0 {
            block.copy_from_slice(&previous[j * pts.d..(j + 1) * pts.d]);
        } else {
            let c = T::of(counts[j]);
            block.iter_mut().for_each(|v| *v /= c);
        }
    }
    sums
}

fn lloyd<T: Scalar>(pts: &Points<T>, k: usize, opts: &KMeansOptions, rng: &mut Rng) -> (Vec<usize>, Vec<T>, T, usize) {
    let mut centres = plus_plus(pts, k, rng);
    let mut labels = vec![0; pts.n];
    let mut dists = vec![T::zero(); pts.n];
    let tol = T::lit(opts.tol);
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        assign(pts, &centres, &mut labels, &mut dists);
        repair_empty(&mut labels, &mut dists, k);
        let next = means(pts, &labels, k, &centres);
        let shift = centres
            .chunks_exact(pts.d)
            .zip(next.chunks_exact(pts.d))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(T::zero(), T::max);
        centres = next;
        if shift < tol {
            break;
        }
    }
    assign(pts, &centres, &mut labels, &mut dists);
    if repair_empty(&mut labels, &mut dists, k) {
        // Reassigning could empty the repaired clusters again (duplicates).
        centres = means(pts, &labels, k, &centres);
    }
    let inertia = (0..pts.n).map(|i| sq_dist(pts.row(i), &centres[labels[i] * pts.d..(labels[i] + 1) * pts.d])).sum();
    (labels, centres, inertia, iterations)
}

/// k-means on the rows of an `n×d` matrix; the lowest-inertia restart wins
/// (earliest on ties).
pub fn kmeans<T: Scalar>(x: &Tensor<T>, k: usize, seed: u64, opts: &KMeansOptions) -> Result<KMeansOutcome<T>> {
    if x.shape().len() != 2 {
        return Err(invalid_shape(format!("k-means expects an n×d matrix, got {:?}", x.shape())));
    }
    let (n, d) = (x.shape()[0], x.shape()[1]);
    if k == 0 || n < k {
        return Err(invalid_param(format!("k-means needs 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    if d == 0 || !x.all_finite() {
        return Err(invalid_param("k-means input must be non-empty and finite"));
    }
    if opts.restarts == 0 || opts.max_iter == 0 {
        return Err(invalid_param("k-means needs at least one restart and one iteration"));
    }
    let pts = Points { data: x.data(), n, d };
    let mut rng = stream_rng(seed, STREAM_KMEANS);
    let mut best: Option<(Vec<usize>, Vec<T>, T, usize)> = None;
    for _ in 0..opts.restarts {
        let run = lloyd(&pts, k, opts, &mut rng);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (labels, centres, inertia, iterations) = best.expect("at least one restart");
    Ok(KMeansOutcome {
        labels,
        centroids: Centroids::new(k, d, centres)?,
        inertia,
        iterations,
    })
}

/// Hard clustering of frozen latent codes.
pub fn hard_cluster<T: Scalar>(z: &Tensor<T>, k: usize, seed: u64, opts: &KMeansOptions) -> Result<ClusteringResult<T>> {
    if k < 2 {
        return Err(invalid_param(format!("hard clustering needs k ≥ 2, got {k}")));
    }
    let out = kmeans(z, k, seed, opts)?;
    ClusteringResult::new(out.labels, k, ClusterMode::HardC2, out.centroids, seed, "kmeans")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::adjusted_rand_index;

    fn col(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(vec![v.len(), 1], v.to_vec()).unwrap()
    }

    #[test]
    fn two_pairs() {
        let out = kmeans(&col(&[0.0, 0.2, 10.0, 10.2]), 2, 1, &KMeansOptions::default()).unwrap();
        let mut c = out.centroids.data().to_vec();
        c.sort_by(f64::total_cmp);
        assert!((c[0] - 0.1).abs() < 1e-12 && (c[1] - 10.1).abs() < 1e-12);
        assert!((out.inertia - 0.04).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n() {
        let out = kmeans(&col(&[3.0, -1.0, 7.5, 2.0, 0.0]), 5, 4, &KMeansOptions::default()).unwrap();
        assert_eq!(out.inertia, 0.0);
        let mut l = out.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn duplicated_points_keep_centroids() {
        let pts = [0.0, 0.5, 1.0, 8.0, 9.0, 20.0, 21.5];
        let doubled: Vec<f64> = pts.iter().chain(pts.iter()).copied().collect();
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        let a = kmeans(&col(&pts), 3, 2, &KMeansOptions::default()).unwrap();
        let b = kmeans(&col(&doubled), 3, 2, &KMeansOptions::default()).unwrap();
        for (x, y) in sorted(a.centroids.data()).iter().zip(sorted(b.centroids.data())) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_points() {
        assert!(kmeans(&col(&[1.0]), 2, 0, &KMeansOptions::default()).is_err());
        assert!(hard_cluster(&col(&[1.0, 2.0]), 1, 0, &KMeansOptions::default()).is_err());
    }

    #[test]
    fn identical_points_fill_every_cluster() {
        let out = kmeans(&col(&[1.0; 6]), 3, 0, &KMeansOptions::default()).unwrap();
        let sizes = super::super::cluster_sizes(&out.labels, 3);
        assert!(sizes.iter().all(|&s| s > 0), "{sizes:?}");
    }

    #[test]
    fn separated_blobs_and_determinism() {
        let mut data = Vec::new();
        let mut truth = Vec::new();
        for (b, centre) in [(0usize, [0.0, 0.0]), (1, [5.0, 5.0]), (2, [-5.0, 5.0])] {
            for i in 0..4 {
                let off = i as f64 * 0.1;
                data.extend_from_slice(&[centre[0] + off, centre[1] - off]);
                truth.push(b);
            }
        }
        let z = Tensor::from_vec(vec![12, 2], data).unwrap();
        let a = hard_cluster(&z, 3, 9, &KMeansOptions::default()).unwrap();
        let b = hard_cluster(&z, 3, 9, &KMeansOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(adjusted_rand_index(&a.labels, &truth).unwrap(), 1.0);
    }
}
