//! Forward kernels and their backward rules. These operate on plain arrays;
//! [`crate::numcore::Var`] wraps them with recording.

mod activation;
mod conv;
mod mmd;
mod norm;
mod pool;
mod softmax;

pub use activation::{activation, activation_backward, Activation};
pub use conv::{conv1d, conv1d_backward, ConvGeom, Padding};
pub(crate) use mmd::check_mmd;
pub use mmd::{mmd_backward, mmd_value};
pub use norm::{group_norm, group_norm_backward};
pub use pool::{pool1d, pool1d_backward, PoolKind};
pub use softmax::{softmax, softmax_backward};

use crate::error::{Error, Result};
use crate::numcore::array::split_axis;
use crate::numcore::{Array, Real};

pub(crate) fn zip_map<F: Real>(a: &Array<F>, b: &Array<F>, f: impl Fn(F, F) -> F) -> Array<F> {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Array::new(a.shape().to_vec(), data).expect("same shape")
}

pub fn concat<F: Real>(parts: &[&Array<F>], axis: usize) -> Result<Array<F>> {
    let first = parts[0];
    if axis >= first.ndim() {
        return Err(Error::shape(format!(
            "concat axis {axis} out of range for {:?}",
            first.shape()
        )));
    }
    let mut total = 0;
    for p in parts {
        let ok = p.ndim() == first.ndim()
            && p.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !ok {
            return Err(Error::shape(format!(
                "concat along axis {axis}: {:?} incompatible with {:?}",
                p.shape(),
                first.shape()
            )));
        }
        total += p.shape()[axis];
    }
    let (outer, _, inner) = split_axis(first.shape(), axis);
    let mut shape = first.shape().to_vec();
    shape[axis] = total;
    let mut data = Vec::with_capacity(outer * total * inner);
    for o in 0..outer {
        for p in parts {
            let n = p.shape()[axis] * inner;
            data.extend_from_slice(&p.data()[o * n..(o + 1) * n]);
        }
    }
    Array::new(shape, data)
}

pub(crate) fn slice_axis<F: Real>(x: &Array<F>, axis: usize, start: usize, len: usize) -> Array<F> {
    let (outer, n, inner) = split_axis(x.shape(), axis);
    let mut shape = x.shape().to_vec();
    shape[axis] = len;
    let mut data = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = o * n * inner + start * inner;
        data.extend_from_slice(&x.data()[base..base + len * inner]);
    }
    Array::new(shape, data).expect("slice shape")
}

pub(crate) fn slice_backward<F: Real>(
    g: &Array<F>,
    in_shape: &[usize],
    axis: usize,
    start: usize,
) -> Array<F> {
    let (outer, n, inner) = split_axis(in_shape, axis);
    let len = g.shape()[axis];
    let mut out = Array::zeros(in_shape.to_vec());
    let od = out.data_mut();
    for o in 0..outer {
        let base = o * n * inner + start * inner;
        let src = &g.data()[o * len * inner..(o + 1) * len * inner];
        od[base..base + len * inner].copy_from_slice(src);
    }
    out
}

pub fn upsample<F: Real>(x: &Array<F>, factor: usize) -> Array<F> {
    let l = *x.shape().last().unwrap_or(&1);
    let mut shape = x.shape().to_vec();
    if let Some(last) = shape.last_mut() {
        *last *= factor;
    }
    let mut data = Vec::with_capacity(x.len() * factor);
    for row in x.data().chunks(l.max(1)) {
        for &v in row {
            for _ in 0..factor {
                data.push(v);
            }
        }
    }
    Array::new(shape, data).expect("upsample shape")
}

pub(crate) fn upsample_backward<F: Real>(g: &Array<F>, factor: usize) -> Array<F> {
    let mut shape = g.shape().to_vec();
    if let Some(last) = shape.last_mut() {
        *last /= factor;
    }
    let data = g
        .data()
        .chunks(factor)
        .map(|c| c.iter().copied().sum())
        .collect();
    Array::new(shape, data).expect("upsample backward shape")
}

pub fn matmul<F: Real>(a: &Array<F>, b: &Array<F>) -> Result<Array<F>> {
    if a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::shape(format!(
            "matmul of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![F::zero(); m * n];
    gemm_nn(a.data(), b.data(), &mut out, m, k, n);
    Array::new(vec![m, n], out)
}

/// `out[m×n] += a[m×k] · b[k×n]`
fn gemm_nn<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == F::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `g · bᵀ` for 2-D operands.
pub(crate) fn matmul_nt<F: Real>(g: &Array<F>, b: &Array<F>) -> Array<F> {
    let (m, n) = (g.shape()[0], g.shape()[1]);
    let k = b.shape()[0];
    let mut out = vec![F::zero(); m * k];
    for i in 0..m {
        let grow = &g.data()[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b.data()[p * n..(p + 1) * n];
            out[i * k + p] = grow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
        }
    }
    Array::new(vec![m, k], out).expect("matmul_nt")
}

/// `aᵀ · g` for 2-D operands.
pub(crate) fn matmul_tn<F: Real>(a: &Array<F>, g: &Array<F>) -> Array<F> {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = g.shape()[1];
    let mut out = vec![F::zero(); k * n];
    for i in 0..m {
        let grow = &g.data()[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a.data()[i * k + p];
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
    Array::new(vec![k, n], out).expect("matmul_tn")
}

pub(crate) fn check_bmm<F: Real>(a: &Array<F>, b: &Array<F>) -> Result<()> {
    if a.ndim() != 3
        || b.ndim() != 3
        || a.shape()[0] != b.shape()[0]
        || a.shape()[2] != b.shape()[1]
    {
        return Err(Error::shape(format!(
            "batched matmul of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub(crate) fn bmm<F: Real>(a: &Array<F>, b: &Array<F>) -> Array<F> {
    let (bs, m, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let n = b.shape()[2];
    let mut out = vec![F::zero(); bs * m * n];
    for i in 0..bs {
        gemm_nn(
            &a.data()[i * m * k..(i + 1) * m * k],
            &b.data()[i * k * n..(i + 1) * k * n],
            &mut out[i * m * n..(i + 1) * m * n],
            m,
            k,
            n,
        );
    }
    Array::new(vec![bs, m, n], out).expect("bmm")
}

pub(crate) fn transpose_last<F: Real>(x: &Array<F>) -> Array<F> {
    let nd = x.ndim();
    let (r, c) = (x.shape()[nd - 2], x.shape()[nd - 1]);
    let batch = x.len() / (r * c).max(1);
    let mut shape = x.shape().to_vec();
    shape.swap(nd - 2, nd - 1);
    let mut out = vec![F::zero(); x.len()];
    for b in 0..batch {
        let src = &x.data()[b * r * c..(b + 1) * r * c];
        let dst = &mut out[b * r * c..(b + 1) * r * c];
        for i in 0..r {
            for j in 0..c {
                dst[j * r + i] = src[i * c + j];
            }
        }
    }
    Array::new(shape, out).expect("transpose")
}

pub(crate) fn add_row_bias<F: Real>(x: &Array<F>, bias: &Array<F>) -> Result<Array<F>> {
    let n = bias.len();
    if bias.ndim() != 1 || x.shape().last() != Some(&n) {
        return Err(Error::shape(format!(
            "row bias {:?} does not match {:?}",
            bias.shape(),
            x.shape()
        )));
    }
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(n) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Ok(out)
}

pub(crate) fn row_bias_backward<F: Real>(g: &Array<F>, bias: &Array<F>) -> Array<F> {
    let n = bias.len();
    let mut out = vec![F::zero(); n];
    for row in g.data().chunks(n) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Array::new(bias.shape().to_vec(), out).expect("row bias")
}

/// Resolves `(batch, channels, length)` of a channel-major array and whether
/// the bias is per-sample.
fn channel_layout(x: &[usize], bias: &[usize]) -> Option<(usize, usize, usize, bool)> {
    match (x.len(), bias.len()) {
        (2, 1) if bias[0] == x[0] => Some((1, x[0], x[1], false)),
        (3, 1) if bias[0] == x[1] => Some((x[0], x[1], x[2], false)),
        (3, 2) if bias[0] == x[0] && bias[1] == x[1] => Some((x[0], x[1], x[2], true)),
        _ => None,
    }
}

pub(crate) fn add_channel_bias<F: Real>(x: &Array<F>, bias: &Array<F>) -> Result<Array<F>> {
    let (b, c, l, per_sample) = channel_layout(x.shape(), bias.shape()).ok_or_else(|| {
        Error::shape(format!(
            "channel bias {:?} does not match {:?}",
            bias.shape(),
            x.shape()
        ))
    })?;
    let mut out = x.clone();
    let od = out.data_mut();
    for bi in 0..b {
        for ci in 0..c {
            let bv = if per_sample {
                bias[bi * c + ci]
            } else {
                bias[ci]
            };
            for v in &mut od[(bi * c + ci) * l..(bi * c + ci + 1) * l] {
                *v += bv;
            }
        }
    }
    Ok(out)
}

pub(crate) fn channel_bias_backward<F: Real>(g: &Array<F>, bias: &Array<F>) -> Array<F> {
    let (b, c, l, per_sample) =
        channel_layout(g.shape(), bias.shape()).expect("checked in forward");
    let mut out = vec![F::zero(); bias.len()];
    for bi in 0..b {
        for ci in 0..c {
            let s: F = g.data()[(bi * c + ci) * l..(bi * c + ci + 1) * l]
                .iter()
                .copied()
                .sum();
            let idx = if per_sample { bi * c + ci } else { ci };
            out[idx] += s;
        }
    }
    Array::new(bias.shape().to_vec(), out).expect("channel bias")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(shape: &[usize], v: &[f64]) -> Array<f64> {
        Array::from_f64(shape.to_vec(), v).unwrap()
    }

    #[test]
    fn upsample_repeats_each_index() {
        let y = upsample(&arr(&[2], &[1.0, 2.0]), 2);
        assert_eq!(y.data(), &[1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn concat_channels() {
        let a = Array::<f64>::zeros(vec![32, 7]);
        let b = Array::<f64>::ones(vec![32, 7]);
        let c = concat(&[&a, &b], 0).unwrap();
        assert_eq!(c.shape(), &[64, 7]);
        assert_eq!(c.data()[32 * 7], 1.0);
        assert!(concat(&[&a, &Array::zeros(vec![32, 8])], 0).is_err());
    }

    #[test]
    fn matmul_matches_hand_product() {
        // [[1,2],[3,4]] · [[5,6],[7,8]] = [[19,22],[43,50]]
        let c = matmul(
            &arr(&[2, 2], &[1., 2., 3., 4.]),
            &arr(&[2, 2], &[5., 6., 7., 8.]),
        )
        .unwrap();
        assert_eq!(c.data(), &[19., 22., 43., 50.]);
        assert!(matmul(
            &arr(&[2, 2], &[1., 2., 3., 4.]),
            &arr(&[3, 1], &[1., 1., 1.])
        )
        .is_err());
    }

    #[test]
    fn transpose_swaps_last_axes() {
        let t = transpose_last(&arr(&[2, 3], &[1., 2., 3., 4., 5., 6.]));
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t.data(), &[1., 4., 2., 5., 3., 6.]);
    }
}
