//! Training objective: noise-prediction MSE, an RBF-mixture MMD between the
//! true and predicted noise batches, and their ω-weighted combination.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Array, Real, Var};

/// Initial ω logit, `sigmoid(-2.2) ≈ 0.1`.
pub const OMEGA_LOGIT_INIT: f64 = -2.2;

/// How the base RBF bandwidth is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// Median pairwise distance of the joint sample, recomputed per call.
    Median,
    /// A fixed base bandwidth.
    Fixed(f64),
}

/// Equal-weight mixture of Gaussian RBF kernels with bandwidths
/// `scale · base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSpec {
    pub scales: Vec<f64>,
    pub bandwidth: Bandwidth,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            scales: vec![0.5, 1.0, 2.0],
            bandwidth: Bandwidth::Median,
        }
    }
}

impl KernelSpec {
    /// Single RBF kernel with bandwidth `sigma` (the non-adaptive ablation).
    pub fn single(sigma: f64) -> Self {
        Self {
            scales: vec![1.0],
            bandwidth: Bandwidth::Fixed(sigma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::config("kernel scales must be positive and finite"));
        }
        if let Bandwidth::Fixed(b) = self.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::config(format!(
                    "fixed bandwidth must be positive, got {b}"
                )));
            }
        }
        Ok(())
    }

    /// Concrete bandwidths for the sample matrices `x` `[N, D]` and `y`
    /// `[M, D]`. Bandwidths are plain numbers and carry no gradient.
    pub fn bandwidths<F: Real>(&self, x: &Array<F>, y: &Array<F>) -> Result<Vec<F>> {
        self.validate()?;
        let base = match self.bandwidth {
            Bandwidth::Fixed(b) => b,
            Bandwidth::Median => median_pairwise_distance(x, y)?,
        };
        Ok(self.scales.iter().map(|&s| F::lit(s * base)).collect())
    }
}

/// Median Euclidean distance over all distinct pairs of the pooled rows of
/// `x` and `y`. Falls back to 1 when every pooled row coincides (or there is
/// only one row), so the kernel stays well defined.
pub fn median_pairwise_distance<F: Real>(x: &Array<F>, y: &Array<F>) -> Result<f64> {
    if x.ndim() != 2 || y.ndim() != 2 || x.shape()[1] != y.shape()[1] {
        return Err(Error::shape(format!(
            "median heuristic needs [N, D] and [M, D], got {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let d = x.shape()[1];
    let rows: Vec<&[F]> = x
        .data()
        .chunks(d.max(1))
        .chain(y.data().chunks(d.max(1)))
        .collect();
    let mut dists = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let d2: f64 = rows[i]
                .iter()
                .zip(rows[j])
                .map(|(&a, &b)| (a.as_f64() - b.as_f64()).powi(2))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return Ok(1.0);
    }
    dists.sort_by(f64::total_cmp);
    let n = dists.len();
    let med = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    Ok(if med > 0.0 { med } else { 1.0 })
}

fn flatten_batch<'g, F: Real>(v: Var<'g, F>) -> Result<Var<'g, F>> {
    let shape = v.shape();
    if shape.is_empty() {
        return Err(Error::shape("mmd samples need a leading batch axis"));
    }
    let rest: usize = shape[1..].iter().product();
    v.reshape(vec![shape[0], rest])
}

/// Mean squared difference over every element.
pub fn noise_mse<'g, F: Real>(eps: Var<'g, F>, eps_hat: Var<'g, F>) -> Result<Var<'g, F>> {
    let d = eps_hat.sub(eps)?;
    Ok(d.mul(d)?.mean())
}

/// Biased squared MMD between the sample sets `n` and `m`, each shaped
/// `[B, ...]` and flattened per sample.
pub fn mmd<'g, F: Real>(n: Var<'g, F>, m: Var<'g, F>, kernel: &KernelSpec) -> Result<Var<'g, F>> {
    let n = flatten_batch(n)?;
    let m = flatten_batch(m)?;
    let bw = kernel.bandwidths(&n.value(), &m.value())?;
    n.mmd(m, &bw)
}

/// Value-only MMD for evaluation code.
pub fn mmd_value<F: Real>(n: &Array<F>, m: &Array<F>, kernel: &KernelSpec) -> Result<F> {
    let flat = |a: &Array<F>| -> Result<Array<F>> {
        if a.ndim() == 0 {
            return Err(Error::shape("mmd samples need a leading batch axis"));
        }
        let rest: usize = a.shape()[1..].iter().product();
        a.clone().reshape(vec![a.shape()[0], rest])
    };
    let (n, m) = (flat(n)?, flat(m)?);
    let bw = kernel.bandwidths(&n, &m)?;
    crate::numcore::ops::check_mmd(&n, &m, &bw)?;
    Ok(crate::numcore::ops::mmd_value(&n, &m, &bw))
}

/// The weight ω in `(1 - ω)·l_noise + ω·l_mmd`.
#[derive(Clone, Copy, Debug)]
pub enum Omega<'g, F: Real> {
    /// `ω = sigmoid(logit)`, differentiable through the logit.
    Learned(Var<'g, F>),
    Fixed(f64),
}

/// Scalar summary of one loss evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_noise: f64,
    pub l_mmd: f64,
    pub l_total: f64,
    pub omega: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.l_noise.is_finite()
            && self.l_mmd.is_finite()
            && self.l_total.is_finite()
            && self.omega.is_finite()
    }
}

/// Ada-MMD objective. Returns the differentiable total and its breakdown.
pub fn ada_mmd_loss<'g, F: Real>(
    eps: Var<'g, F>,
    eps_hat: Var<'g, F>,
    omega: Omega<'g, F>,
    kernel: &KernelSpec,
) -> Result<(Var<'g, F>, LossBreakdown)> {
    let l_noise = noise_mse(eps, eps_hat)?;
    let l_mmd = mmd(eps, eps_hat, kernel)?;
    let graph = eps.graph();
    let (w, one_minus_w) = match omega {
        Omega::Learned(logit) => {
            if logit.shape().iter().product::<usize>() != 1 {
                return Err(Error::shape("omega logit must be a single value"));
            }
            if !logit.item().is_finite() {
                return Err(Error::validation("omega logit is not finite"));
            }
            let w = logit.reshape(Vec::new())?.sigmoid();
            (w, w.affine(-F::one(), F::one()))
        }
        Omega::Fixed(w) => {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::config(format!(
                    "fixed omega must lie in [0, 1], got {w}"
                )));
            }
            (
                graph.constant(Array::scalar(F::lit(w))),
                graph.constant(Array::scalar(F::lit(1.0 - w))),
            )
        }
    };
    let total = one_minus_w.mul(l_noise)?.add(w.mul(l_mmd)?)?;
    let breakdown = LossBreakdown {
        l_noise: l_noise.item().as_f64(),
        l_mmd: l_mmd.item().as_f64(),
        l_total: total.item().as_f64(),
        omega: w.item().as_f64(),
    };
    Ok((total, breakdown))
}
