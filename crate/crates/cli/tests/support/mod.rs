//! Independent reference implementations used by the acceptance suite. Each
//! follows the textbook definition as literally as possible and shares no
//! code with the library.

#![allow(dead_code)]

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn members(labels: &[usize], c: usize) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i] == c).collect()
}

fn mean_point(points: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let d = points[0].len();
    (0..d)
        .map(|j| idx.iter().map(|&i| points[i][j]).sum::<f64>() / idx.len() as f64)
        .collect()
}

/// Mean over points of `(b − a) / max(a, b)`; singleton members score 0.
/// Labels must be `0..k` with every cluster non-empty.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = points.len();
    let mut sum = 0.0;
    for i in 0..n {
        let own = members(labels, labels[i]);
        if own.len() == 1 {
            continue;
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| euclid(&points[i], &points[j])).sum::<f64>()
            / (own.len() - 1) as f64;
        let mut b = f64::INFINITY;
        for c in (0..k).filter(|&c| c != labels[i]) {
            let other = members(labels, c);
            let mean = other.iter().map(|&j| euclid(&points[i], &points[j])).sum::<f64>() / other.len() as f64;
            b = b.min(mean);
        }
        sum += (b - a) / a.max(b);
    }
    sum / n as f64
}

/// `[tr(B)/(k−1)] / [tr(W)/(n−k)]`.
pub fn calinski_harabasz(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = points.len();
    let all: Vec<usize> = (0..n).collect();
    let grand = mean_point(points, &all);
    let mut b = 0.0;
    let mut w = 0.0;
    for c in 0..k {
        let idx = members(labels, c);
        let centre = mean_point(points, &idx);
        b += idx.len() as f64 * euclid(&centre, &grand).powi(2);
        w += idx.iter().map(|&i| euclid(&points[i], &centre).powi(2)).sum::<f64>();
    }
    (b / (k - 1) as f64) / (w / (n - k) as f64)
}

/// `(1/k) Σ_i max_{j≠i} (S_i + S_j) / M_ij` with `S` the mean distance to the
/// centroid and `M` the centroid distance.
pub fn davies_bouldin(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let centres: Vec<Vec<f64>> = (0..k).map(|c| mean_point(points, &members(labels, c))).collect();
    let scatter: Vec<f64> = (0..k)
        .map(|c| {
            let idx = members(labels, c);
            idx.iter().map(|&i| euclid(&points[i], &centres[c])).sum::<f64>() / idx.len() as f64
        })
        .collect();
    (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (scatter[i] + scatter[j]) / euclid(&centres[i], &centres[j]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / k as f64
}

/// Minimum over every monotone warping path from `(0,0)` to the last cell of
/// the summed `|a_i − b_j|`, found by exhaustive recursion.
pub fn dtw_brute(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
        let here = (a[i] - b[j]).abs();
        if i + 1 == a.len() && j + 1 == b.len() {
            return here;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() {
            best = best.min(walk(a, b, i + 1, j));
        }
        if j + 1 < b.len() {
            best = best.min(walk(a, b, i, j + 1));
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(walk(a, b, i + 1, j + 1));
        }
        here + best
    }
    walk(a, b, 0, 0)
}

/// Student-t memberships, written out directly.
pub fn soft_assign(z: &[Vec<f64>], mu: &[Vec<f64>], alpha: f64) -> Vec<Vec<f64>> {
    z.iter()
        .map(|zi| {
            let raw: Vec<f64> = mu
                .iter()
                .map(|m| (1.0 + euclid(zi, m).powi(2) / alpha).powf(-(alpha + 1.0) / 2.0))
                .collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn kl(p: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
    p.iter()
        .flatten()
        .zip(q.iter().flatten())
        .filter(|(pv, _)| **pv > 0.0)
        .map(|(pv, qv)| pv * (pv / qv).ln())
        .sum()
}
