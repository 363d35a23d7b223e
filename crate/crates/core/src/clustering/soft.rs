//! Student-t soft assignment, its sharpened target and the KL clustering loss.

use super::{sq_dist, Centroids};
use crate::error::{invalid_param, invalid_shape, Error, Result};
use crate::nn::Tensor;
use crate::Scalar;

/// Row-stochastic `n×k` membership probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment<T> {
    pub q: Tensor<T>,
    pub alpha: T,
}

fn check_codes<T: Scalar>(z: &Tensor<T>, centroids: &Centroids<T>) -> Result<usize> {
    if z.shape().len() != 2 || z.shape()[1] != centroids.dim() {
        return Err(invalid_shape(format!(
            "codes {:?} do not match {}-dimensional centroids",
            z.shape(),
            centroids.dim()
        )));
    }
    Ok(z.shape()[0])
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha.is_finite() {
        Ok(())
    } else {
        Err(invalid_param(format!("degrees of freedom must be positive, got {alpha}")))
    }
}

/// `1/(1 + d²/α)`; the kernel is this raised to `(α+1)/2`.
fn base<T: Scalar>(d2: T, alpha: T) -> T {
    T::one() / (T::one() + d2 / alpha)
}

pub fn soft_assign<T: Scalar>(z: &Tensor<T>, centroids: &Centroids<T>, alpha: T) -> Result<SoftAssignment<T>> {
    let n = check_codes(z, centroids)?;
    check_alpha(alpha)?;
    let k = centroids.k();
    let power = (alpha + T::one()) / T::lit(2.0);
    let mut q = Vec::with_capacity(n * k);
    for i in 0..n {
        let start = q.len();
        q.extend((0..k).map(|j| base(sq_dist(z.row(i), centroids.row(j)), alpha).powf(power)));
        let row = &mut q[start..];
        let total: T = row.iter().copied().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(SoftAssignment {
        q: Tensor::from_vec(vec![n, k], q)?,
        alpha,
    })
}

/// Sharpened targets `p ∝ q²/f` with `f` the soft cluster frequencies.
pub fn target_distribution<T: Scalar>(q: &Tensor<T>) -> Result<Tensor<T>> {
    if q.shape().len() != 2 {
        return Err(invalid_shape(format!("expected an n×k matrix, got {:?}", q.shape())));
    }
    let (n, k) = (q.shape()[0], q.shape()[1]);
    let mut freq = vec![T::zero(); k];
    for i in 0..n {
        for (f, &v) in freq.iter_mut().zip(q.row(i)) {
            *f += v;
        }
    }
    if let Some(j) = freq.iter().position(|&f| f <= T::zero()) {
        return Err(Error::DegenerateCluster(format!("cluster {j} has zero soft frequency")));
    }
    let mut p = Vec::with_capacity(n * k);
    for i in 0..n {
        let start = p.len();
        p.extend(q.row(i).iter().zip(&freq).map(|(&v, &f)| v * v / f));
        let row = &mut p[start..];
        let total: T = row.iter().copied().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    Tensor::from_vec(vec![n, k], p)
}

/// `Σ_i Σ_j p log(p/q)` with `0·log 0 = 0`.
pub fn kl_divergence<T: Scalar>(p: &Tensor<T>, q: &Tensor<T>) -> Result<T> {
    if p.shape() != q.shape() {
        return Err(invalid_shape(format!("P {:?} and Q {:?} differ in shape", p.shape(), q.shape())));
    }
    let mut total = T::zero();
    for (idx, (&pv, &qv)) in p.data().iter().zip(q.data()).enumerate() {
        if pv > T::zero() {
            if qv <= T::zero() {
                return Err(Error::DivergenceUndefined(format!(
                    "q is zero where p is positive at entry {idx}"
                )));
            }
            total += pv * (pv / qv).ln();
        }
    }
    // Non-negative for row-stochastic inputs; round-off can land a few ulps
    // below zero when P ≈ Q.
    Ok(total.max(T::zero()))
}

/// Shared factor `(α+1)/α · (1+d²/α)^(-1) · (p−q)` for every (i, j).
fn weights<T: Scalar>(
    z: &Tensor<T>,
    centroids: &Centroids<T>,
    p: &Tensor<T>,
    q: &Tensor<T>,
    alpha: T,
) -> Result<Vec<T>> {
    let n = check_codes(z, centroids)?;
    check_alpha(alpha)?;
    let shape = [n, centroids.k()];
    if p.shape() != shape || q.shape() != shape {
        return Err(invalid_shape(format!(
            "P {:?} and Q {:?} must both be {n}×{}",
            p.shape(),
            q.shape(),
            centroids.k()
        )));
    }
    let scale = (alpha + T::one()) / alpha;
    let mut w = Vec::with_capacity(n * centroids.k());
    for i in 0..n {
        for j in 0..centroids.k() {
            let b = base(sq_dist(z.row(i), centroids.row(j)), alpha);
            w.push(scale * b * (p.row(i)[j] - q.row(i)[j]));
        }
    }
    Ok(w)
}

/// Gradient of the KL loss (with P held fixed) with respect to each code.
pub fn clustering_grad_z<T: Scalar>(
    z: &Tensor<T>,
    centroids: &Centroids<T>,
    p: &Tensor<T>,
    q: &Tensor<T>,
    alpha: T,
) -> Result<Tensor<T>> {
    let w = weights(z, centroids, p, q, alpha)?;
    let (n, k, d) = (z.rows(), centroids.k(), centroids.dim());
    let mut g = vec![T::zero(); n * d];
    for i in 0..n {
        let zi = z.row(i);
        let gi = &mut g[i * d..(i + 1) * d];
        for j in 0..k {
            let wij = w[i * k + j];
            for ((g, &a), &m) in gi.iter_mut().zip(zi).zip(centroids.row(j)) {
                *g += wij * (a - m);
            }
        }
    }
    Tensor::from_vec(vec![n, d], g)
}

/// Gradient of the KL loss with respect to each centroid, summed over samples.
pub fn clustering_grad_mu<T: Scalar>(
    z: &Tensor<T>,
    centroids: &Centroids<T>,
    p: &Tensor<T>,
    q: &Tensor<T>,
    alpha: T,
) -> Result<Tensor<T>> {
    let w = weights(z, centroids, p, q, alpha)?;
    let (n, k, d) = (z.rows(), centroids.k(), centroids.dim());
    let mut g = vec![T::zero(); k * d];
    for i in 0..n {
        let zi = z.row(i);
        for j in 0..k {
            let wij = w[i * k + j];
            for ((g, &a), &m) in g[j * d..(j + 1) * d].iter_mut().zip(zi).zip(centroids.row(j)) {
                *g -= wij * (a - m);
            }
        }
    }
    Tensor::from_vec(vec![k, d], g)
}

/// Per-row index of the largest entry; ties go to the lower index.
pub fn argmax_rows<T: Scalar>(m: &Tensor<T>) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                .0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Tensor<f64> {
        Tensor::matrix(rows, cols, v).unwrap()
    }

    #[test]
    fn equidistant_and_unit_offset() {
        let c = Centroids::new(2, 1, vec![0.0, 1.0]).unwrap();
        let q = soft_assign(&m(2, 1, &[0.5, 0.0]), &c, 1.0).unwrap().q;
        assert_eq!(q.row(0), &[0.5, 0.5]);
        assert!((q.row(1)[0] - 2.0 / 3.0).abs() < 1e-15 && (q.row(1)[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn target_hand_case() {
        let p = target_distribution(&m(2, 2, &[0.8, 0.2, 0.4, 0.6])).unwrap();
        let expect = [0.9143, 0.0857, 0.2286, 0.7714];
        for (a, b) in p.data().iter().zip(expect) {
            assert!((a - b).abs() < 5e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn target_one_hot_and_uniform() {
        let one_hot = m(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert_eq!(target_distribution(&one_hot).unwrap(), one_hot);
        let uniform = m(2, 2, &[0.5; 4]);
        assert_eq!(target_distribution(&uniform).unwrap(), uniform);
        assert!(matches!(
            target_distribution(&m(2, 2, &[1.0, 0.0, 1.0, 0.0])),
            Err(Error::DegenerateCluster(_))
        ));
    }

    #[test]
    fn kl_cases() {
        let q = m(1, 2, &[0.5, 0.5]);
        assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
        let v = kl_divergence(&m(1, 2, &[1.0, 0.0]), &q).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(
            kl_divergence(&q, &m(1, 2, &[1.0, 0.0])),
            Err(Error::DivergenceUndefined(_))
        ));
    }

    #[test]
    fn gradients_vanish_when_target_equals_assignment() {
        let z = m(3, 2, &[0.1, 0.2, -1.0, 0.5, 2.0, 2.0]);
        let c = Centroids::new(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let q = soft_assign(&z, &c, 1.0).unwrap().q;
        assert!(clustering_grad_z(&z, &c, &q, &q, 1.0).unwrap().data().iter().all(|&g| g == 0.0));
        assert!(clustering_grad_mu(&z, &c, &q, &q, 1.0).unwrap().data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax_rows(&m(2, 3, &[0.2, 0.4, 0.4, 0.5, 0.1, 0.4])), vec![1, 0]);
    }
}
