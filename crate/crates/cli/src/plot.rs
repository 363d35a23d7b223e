//! Deterministic SVG 1.1 plots: cluster-mean curves and a PCA scatter.

use std::fmt::Write as _;
use std::path::Path;

use log::info;

use crate::error::{CliError, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const LEGEND_W: f64 = 150.0;
const COLORS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn color(i: usize) -> &'static str {
    COLORS[i % COLORS.len()]
}

fn header(title: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{MARGIN}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n\
         <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#333\"/>\n",
        WIDTH - 2.0 * MARGIN - LEGEND_W,
        HEIGHT - 2.0 * MARGIN
    )
}

fn legend(svg: &mut String, row: usize, idx: usize, label: &str) {
    let x = WIDTH - MARGIN - LEGEND_W + 16.0;
    let y = MARGIN + 12.0 + 18.0 * row as f64;
    let _ = writeln!(
        svg,
        "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>",
        y - 10.0,
        color(idx),
        x + 18.0,
        y
    );
}

/// Maps `v` in `[lo, hi]` onto the plot area along one axis.
fn scale(v: f64, lo: f64, hi: f64, start: f64, len: f64) -> f64 {
    if hi > lo {
        start + (v - lo) / (hi - lo) * len
    } else {
        start + len / 2.0
    }
}

/// One polyline per non-empty cluster: the mean of its curves by index.
pub fn centers_svg(curves: &[Vec<f64>], labels: &[usize], k: usize) -> String {
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    let (pw, ph) = (WIDTH - 2.0 * MARGIN - LEGEND_W, HEIGHT - 2.0 * MARGIN);
    let means: Vec<Option<Vec<f64>>> = (0..k)
        .map(|c| {
            let members: Vec<&Vec<f64>> = curves.iter().zip(labels).filter(|(_, &l)| l == c).map(|(v, _)| v).collect();
            if members.is_empty() {
                info!("cluster {c} is empty; no center curve drawn");
                return None;
            }
            Some((0..len).map(|t| members.iter().map(|m| m[t]).sum::<f64>() / members.len() as f64).collect())
        })
        .collect();
    let (lo, hi) = means
        .iter()
        .flatten()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut svg = header("Cluster centers");
    let mut row = 0;
    for (c, mean) in means.iter().enumerate() {
        let Some(mean) = mean else { continue };
        let pts: Vec<String> = mean
            .iter()
            .enumerate()
            .map(|(t, &v)| {
                let x = scale(t as f64, 0.0, (len - 1) as f64, MARGIN, pw);
                let y = HEIGHT - scale(v, lo, hi, MARGIN, ph);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            color(c),
            pts.join(" ")
        );
        let size = labels.iter().filter(|&&l| l == c).count();
        legend(&mut svg, row, c, &format!("cluster {c} (n={size})"));
        row += 1;
    }
    svg.push_str("</svg>\n");
    svg
}

/// First two principal components of the rows of `x` (`n×d`), by power
/// iteration with deflation on the covariance matrix.
pub fn pca_2d(x: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return vec![[0.0, 0.0]; n];
    }
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centred: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect()).collect();
    let mut cov = vec![0.0; d * d];
    for r in &centred {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += r[i] * r[j];
            }
        }
    }
    let mut components: Vec<Vec<f64>> = Vec::new();
    for c in 0..2.min(d) {
        let mut v: Vec<f64> = (0..d).map(|j| 1.0 + ((j + c) % 7) as f64 * 0.1).collect();
        let mut lambda = 0.0;
        for _ in 0..500 {
            let mut next: Vec<f64> = (0..d).map(|i| (0..d).map(|j| cov[i * d + j] * v[j]).sum()).collect();
            let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            next.iter_mut().for_each(|a| *a /= norm);
            lambda = norm;
            v = next;
        }
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] -= lambda * v[i] * v[j];
            }
        }
        components.push(v);
    }
    centred
        .iter()
        .map(|r| {
            let p = |c: usize| components.get(c).map_or(0.0, |v| r.iter().zip(v).map(|(a, b)| a * b).sum());
            [p(0), p(1)]
        })
        .collect()
}

pub fn scatter_svg(points: &[[f64; 2]], labels: &[usize], k: usize) -> String {
    let (pw, ph) = (WIDTH - 2.0 * MARGIN - LEGEND_W, HEIGHT - 2.0 * MARGIN);
    let range = |a: usize| {
        points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[a]), hi.max(p[a])))
    };
    let ((x0, x1), (y0, y1)) = (range(0), range(1));
    let mut svg = header("Latent codes (PCA)");
    for (p, &l) in points.iter().zip(labels) {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.7\"/>",
            scale(p[0], x0, x1, MARGIN, pw),
            HEIGHT - scale(p[1], y0, y1, MARGIN, ph),
            color(l)
        );
    }
    for c in 0..k {
        legend(&mut svg, c, c, &format!("cluster {c}"));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn plot_centers(curves: &[Vec<f64>], labels: &[usize], k: usize, path: &Path) -> Result<()> {
    std::fs::write(path, centers_svg(curves, labels, k)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_non_empty_cluster() {
        let curves = vec![vec![0.0, 1.0, 0.5], vec![0.2, 0.8, 0.4], vec![1.0, 0.0, 1.0]];
        let svg = centers_svg(&curves, &[0, 0, 2], 3);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg, centers_svg(&curves, &[0, 0, 2], 3));
        assert!(svg.contains("cluster 2 (n=1)") && !svg.contains("cluster 1 (n="));
    }

    #[test]
    fn pca_finds_the_dominant_axis() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64, 0.01 * ((i % 2) as f64)]).collect();
        let p = pca_2d(&x);
        let spread0 = p.iter().map(|q| q[0].abs()).fold(0.0, f64::max);
        let spread1 = p.iter().map(|q| q[1].abs()).fold(0.0, f64::max);
        assert!(spread0 > 100.0 * spread1);
        assert_eq!(scatter_svg(&p, &[0; 10], 1).matches("<circle").count(), 10);
    }
}
