//! Elastic distances between multichannel sequences and condition-matched
//! aggregation.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::numcore::Array;

/// Euclidean distance between time index `i` of `x` and `j` of `y`, both
/// `[C, L]`.
fn point_dist(x: &Array<f64>, i: usize, y: &Array<f64>, j: usize) -> f64 {
    let (lx, ly) = (x.shape()[1], y.shape()[1]);
    let (xd, yd) = (x.data(), y.data());
    let mut s = 0.0;
    for ch in 0..x.shape()[0] {
        let d = xd[ch * lx + i] - yd[ch * ly + j];
        s += d * d;
    }
    s.sqrt()
}

fn check_pair(x: &Array<f64>, y: &Array<f64>) -> Result<()> {
    if x.ndim() != 2 || y.ndim() != 2 || x.shape()[0] != y.shape()[0] {
        return Err(Error::shape(format!(
            "sequences must be [C, L] with equal C, got {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    if x.shape()[1] == 0 || y.shape()[1] == 0 {
        return Err(Error::shape("sequences must be non-empty"));
    }
    Ok(())
}

/// Accumulates `combine(cost, best predecessor)` over the alignment grid
/// with match/insert/delete steps.
fn grid(x: &Array<f64>, y: &Array<f64>, combine: impl Fn(f64, f64) -> f64) -> f64 {
    let (n, m) = (x.shape()[1], y.shape()[1]);
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            let d = point_dist(x, i, y, j);
            cur[j] = if i == 0 && j == 0 {
                d
            } else {
                let mut best = prev[j];
                if j > 0 {
                    best = best.min(cur[j - 1]).min(prev[j - 1]);
                }
                combine(d, best)
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// Dynamic time warping with Euclidean local cost; lengths may differ.
pub fn dtw(x: &Array<f64>, y: &Array<f64>) -> Result<f64> {
    check_pair(x, y)?;
    Ok(grid(x, y, |d, best| d + best))
}

/// Discrete Fréchet distance.
pub fn frechet(x: &Array<f64>, y: &Array<f64>) -> Result<f64> {
    check_pair(x, y)?;
    Ok(grid(x, y, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub dtw_mean: f64,
    pub frechet_mean: f64,
    /// `(synthetic index, real index)` for every synthetic window.
    pub pairs: Vec<(usize, usize)>,
}

/// Condition key of the real windows nearest to `c`; equal distances go
/// to the key whose first window comes earlier.
fn nearest(index: &BTreeMap<OrderedFloat<f64>, Vec<usize>>, c: f64) -> OrderedFloat<f64> {
    let key = OrderedFloat(c);
    let below = index.range(..=key).next_back();
    let above = index.range(key..).next();
    match (below, above) {
        (Some((kb, ib)), Some((ka, ia))) => {
            let (db, da) = (c - kb.0, ka.0 - c);
            if db < da || (db == da && ib[0] < ia[0]) {
                *kb
            } else {
                *ka
            }
        }
        (Some((k, _)), None) | (None, Some((k, _))) => *k,
        (None, None) => unreachable!("index is non-empty"),
    }
}

/// Pairs each synthetic window with a real window sharing its condition
/// and averages the DTW and Fréchet distances over the pairs. Among real
/// windows with the same condition, successive synthetic windows take them
/// in dataset order, wrapping around; without an exact match the nearest
/// condition is used.
pub fn distance_report(real: &WindowSet, synth: &WindowSet) -> Result<DistanceReport> {
    if real.is_empty() || synth.is_empty() {
        return Err(Error::validation(
            "distance report needs non-empty real and synthetic sets",
        ));
    }
    let mut index: BTreeMap<OrderedFloat<f64>, Vec<usize>> = BTreeMap::new();
    for (i, &c) in real.conditions.iter().enumerate() {
        index.entry(OrderedFloat(c)).or_default().push(i);
    }
    let mut used: BTreeMap<OrderedFloat<f64>, usize> = BTreeMap::new();
    let pairs: Vec<(usize, usize)> = synth
        .conditions
        .iter()
        .enumerate()
        .map(|(s, &c)| {
            let key = nearest(&index, c);
            let group = &index[&key];
            let k = used.entry(key).or_insert(0);
            let r = group[*k % group.len()];
            *k += 1;
            (s, r)
        })
        .collect();
    let dists = pairs
        .par_iter()
        .map(|&(s, r)| {
            Ok((
                dtw(&synth.windows[s], &real.windows[r])?,
                frechet(&synth.windows[s], &real.windows[r])?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = dists.len() as f64;
    Ok(DistanceReport {
        dtw_mean: dists.iter().map(|d| d.0).sum::<f64>() / n,
        frechet_mean: dists.iter().map(|d| d.1).sum::<f64>() / n,
        pairs,
    })
}

/// Mean over `queries` of the DTW distance to the closest window in `pool`.
pub fn mean_nearest_dtw(queries: &[Array<f64>], pool: &[Array<f64>]) -> Result<f64> {
    if queries.is_empty() || pool.is_empty() {
        return Err(Error::validation(
            "nearest-neighbour DTW needs non-empty sets",
        ));
    }
    let best = queries
        .par_iter()
        .map(|q| {
            pool.iter()
                .map(|p| dtw(q, p))
                .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(best.iter().sum::<f64>() / best.len() as f64)
}
