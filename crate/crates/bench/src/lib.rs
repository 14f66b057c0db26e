//! Shared inputs for the benchmarks.

use diffmts_core::numcore::{Array, Real};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Standard-normal array with a fixed seed.
pub fn randn<F: Real>(shape: &[usize], seed: u64) -> Array<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Array::from_f64(shape.to_vec(), &data).expect("shape matches data")
}

/// `count` windows of shape `[channels, length]`.
pub fn windows(count: usize, channels: usize, length: usize, seed: u64) -> Vec<Array<f64>> {
    (0..count)
        .map(|i| randn(&[channels, length], seed + i as u64))
        .collect()
}

/// Evenly spaced conditions in `[0, 1]`.
pub fn conditions(count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| i as f64 / count.saturating_sub(1).max(1) as f64)
        .collect()
}
