use crate::error::{Error, Result};
use crate::numcore::{Array, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Avg,
    Max,
}

fn out_len(len: usize, kernel: usize, stride: usize) -> usize {
    let pad = (kernel - 1) / 2;
    (len + 2 * pad - kernel) / stride + 1
}

/// Pooling along the last axis with replicate padding of `(kernel-1)/2` on
/// each side. With `stride == 1` the length is preserved. The second return
/// value holds, for max pooling, the source index of each output within its
/// row (first maximum wins on ties).
pub fn pool1d<F: Real>(
    x: &Array<F>,
    kind: PoolKind,
    kernel: usize,
    stride: usize,
) -> Result<(Array<F>, Vec<usize>)> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::config(format!(
            "pool kernel must be odd, got {kernel}"
        )));
    }
    if stride == 0 {
        return Err(Error::config("pool stride must be >= 1"));
    }
    let len = *x
        .shape()
        .last()
        .ok_or_else(|| Error::shape("pool1d on a scalar"))?;
    if len == 0 || kernel > 2 * len {
        return Err(Error::validation(format!(
            "pool kernel {kernel} is degenerate for length {len}"
        )));
    }
    let pad = (kernel - 1) / 2;
    let lo = out_len(len, kernel, stride);
    let rows = x.len() / len;
    let mut out = Vec::with_capacity(rows * lo);
    let mut argmax = Vec::new();
    let inv_k = F::one() / F::lit(kernel as f64);
    for r in 0..rows {
        let row = &x.data()[r * len..(r + 1) * len];
        for t in 0..lo {
            let src = |j: usize| (t * stride + j).saturating_sub(pad).min(len - 1);
            match kind {
                PoolKind::Avg => {
                    let s: F = (0..kernel).map(|j| row[src(j)]).sum();
                    out.push(s * inv_k);
                }
                PoolKind::Max => {
                    let mut best = src(0);
                    for j in 1..kernel {
                        let i = src(j);
                        if row[i] > row[best] {
                            best = i;
                        }
                    }
                    out.push(row[best]);
                    argmax.push(best);
                }
            }
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().expect("non-scalar") = lo;
    Ok((Array::new(shape, out)?, argmax))
}

pub fn pool1d_backward<F: Real>(
    in_shape: &[usize],
    kind: PoolKind,
    kernel: usize,
    stride: usize,
    argmax: &[usize],
    g: &Array<F>,
) -> Array<F> {
    let len = *in_shape.last().expect("non-scalar");
    let lo = out_len(len, kernel, stride);
    let pad = (kernel - 1) / 2;
    let mut gx = Array::zeros(in_shape.to_vec());
    let rows = gx.len() / len;
    let inv_k = F::one() / F::lit(kernel as f64);
    let gxd = gx.data_mut();
    for r in 0..rows {
        for t in 0..lo {
            let gv = g[r * lo + t];
            match kind {
                PoolKind::Avg => {
                    for j in 0..kernel {
                        let i = (t * stride + j).saturating_sub(pad).min(len - 1);
                        gxd[r * len + i] += gv * inv_k;
                    }
                }
                PoolKind::Max => gxd[r * len + argmax[r * lo + t]] += gv,
            }
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Window enumeration over an explicitly replicate-padded row.
    fn enumerate(x: &[f64], k: usize, max: bool) -> Vec<f64> {
        let p = (k - 1) / 2;
        let mut padded = vec![x[0]; p];
        padded.extend_from_slice(x);
        padded.extend(std::iter::repeat_n(*x.last().unwrap(), p));
        padded
            .windows(k)
            .map(|w| {
                if max {
                    w.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    w.iter().sum::<f64>() / k as f64
                }
            })
            .collect()
    }

    fn pool(x: &[f64], kind: PoolKind) -> Vec<f64> {
        let a = Array::from_f64(vec![1, x.len()], x).unwrap();
        pool1d(&a, kind, 3, 1).unwrap().0.into_data()
    }

    #[test]
    fn three_point_windows() {
        let avg = pool(&[1., 2., 3.], PoolKind::Avg);
        let expect = [4. / 3., 2., 8. / 3.];
        for (a, e) in avg.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
        assert_eq!(pool(&[1., 2., 3.], PoolKind::Max), vec![2., 3., 3.]);
        assert_eq!(enumerate(&[1., 2., 3.], 3, true), vec![2., 3., 3.]);
    }

    #[test]
    fn matches_window_enumeration() {
        let x = [0.3, -1.2, 4.0, 4.0, 0.0, 2.5, -3.0];
        for k in [1, 3, 5, 7] {
            let a = Array::<f64>::from_f64(vec![x.len()], &x).unwrap();
            let avg = pool1d(&a, PoolKind::Avg, k, 1).unwrap().0;
            let max = pool1d(&a, PoolKind::Max, k, 1).unwrap().0;
            for (u, v) in avg.data().iter().zip(enumerate(&x, k, false)) {
                assert!((u - v).abs() < 1e-12);
            }
            assert_eq!(max.data(), enumerate(&x, k, true).as_slice());
        }
    }

    #[test]
    fn constant_series_unchanged() {
        let x = [2.5; 6];
        assert_eq!(pool(&x, PoolKind::Avg), x.to_vec());
        assert_eq!(pool(&x, PoolKind::Max), x.to_vec());
    }

    #[test]
    fn preserves_length() {
        let a = Array::<f64>::zeros(vec![64, 48]);
        assert_eq!(
            pool1d(&a, PoolKind::Max, 3, 1).unwrap().0.shape(),
            &[64, 48]
        );
    }

    #[test]
    fn degenerate_kernel() {
        let a = Array::<f64>::zeros(vec![2]);
        assert!(matches!(
            pool1d(&a, PoolKind::Avg, 5, 1),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            pool1d(&a, PoolKind::Avg, 2, 1),
            Err(Error::Config(_))
        ));
    }
}
