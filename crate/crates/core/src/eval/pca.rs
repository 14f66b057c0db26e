//! Principal-component projection of flattened windows.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Array;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// `[n][k]` coordinates.
    pub coords: Vec<Vec<f64>>,
    /// `[k][d]` unit components, strongest first.
    pub components: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Share of total variance per component.
    pub explained_variance_ratio: Vec<f64>,
}

impl Projection {
    /// Maps coordinates back to the flattened input space.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, comp) in coords.iter().zip(&self.components) {
            for (o, v) in out.iter_mut().zip(comp) {
                *o += c * v;
            }
        }
        out
    }
}

/// Projects windows (flattened per sample) onto their top `k` principal
/// components. Each component's largest-magnitude loading is positive.
pub fn pca_project(windows: &[Array<f64>], k: usize) -> Result<Projection> {
    let n = windows.len();
    if n == 0 {
        return Err(Error::validation("pca needs at least one sample"));
    }
    let d = windows[0].len();
    if windows.iter().any(|w| w.len() != d) {
        return Err(Error::shape("pca samples must share one size"));
    }
    if k == 0 || k > d || k > n {
        return Err(Error::validation(format!(
            "cannot take {k} components from {n} samples of dimension {d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for w in windows {
        for (m, v) in mean.iter_mut().zip(w.data()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| windows[i].data()[j] - mean[j]);
    let cov = centered.transpose() * &centered / ((n.max(2) - 1) as f64);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut components = Vec::with_capacity(k);
    let mut ratios = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = v.iter().copied().fold(
            0.0f64,
            |best, x| if x.abs() > best.abs() { x } else { best },
        );
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        let lambda = eig.eigenvalues[idx].max(0.0);
        ratios.push(if total > 0.0 { lambda / total } else { 0.0 });
    }
    let coords = (0..n)
        .map(|i| {
            components
                .iter()
                .map(|c| {
                    c.iter()
                        .zip(centered.row(i).iter())
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(Projection {
        coords,
        components,
        mean,
        explained_variance_ratio: ratios,
    })
}
