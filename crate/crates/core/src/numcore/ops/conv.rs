use crate::error::{Error, Result};
use crate::numcore::{Array, Real};

/// Padding specification for [`conv1d`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding chosen so the output length is `ceil(L / stride)`.
    Same,
    /// Explicit zero padding on the left and right.
    Explicit(usize, usize),
}

/// Resolved geometry of a recorded convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl Padding {
    fn resolve(self, len: usize, kernel: usize, stride: usize) -> (usize, usize) {
        match self {
            Padding::Explicit(l, r) => (l, r),
            Padding::Same => {
                let out = len.div_ceil(stride);
                let total = ((out.saturating_sub(1)) * stride + kernel).saturating_sub(len);
                (total / 2, total - total / 2)
            }
        }
    }
}

struct Dims {
    batch: usize,
    c_in: usize,
    len: usize,
    c_out: usize,
    k: usize,
    out_len: usize,
}

fn dims<F: Real>(x: &Array<F>, w: &Array<F>, geom: ConvGeom) -> Dims {
    let (batch, c_in, len) = match x.shape() {
        [c, l] => (1, *c, *l),
        [b, c, l] => (*b, *c, *l),
        _ => unreachable!("checked in forward"),
    };
    let (c_out, k) = (w.shape()[0], w.shape()[2]);
    let out_len = (len + geom.pad_left + geom.pad_right - k) / geom.stride + 1;
    Dims {
        batch,
        c_in,
        len,
        c_out,
        k,
        out_len,
    }
}

/// Output positions `t` for which `t * stride + kk - pad_left` lands inside
/// `[0, len)`, as a half-open range.
#[inline]
fn valid_range(kk: usize, g: ConvGeom, len: usize, out_len: usize) -> (usize, usize) {
    let s = g.stride as isize;
    let off = kk as isize - g.pad_left as isize;
    // t*s + off >= 0  ->  t >= ceil(-off / s)
    let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
    // t*s + off <= len - 1
    let hi_num = len as isize - 1 - off;
    if hi_num < 0 {
        return (0, 0);
    }
    let hi = (hi_num / s + 1).min(out_len as isize);
    (lo as usize, hi.max(lo) as usize)
}

/// Cross-correlation (kernels are not flipped) plus bias.
pub fn conv1d<F: Real>(
    x: &Array<F>,
    w: &Array<F>,
    bias: Option<&Array<F>>,
    stride: usize,
    padding: Padding,
) -> Result<(Array<F>, ConvGeom)> {
    if stride == 0 {
        return Err(Error::config("conv1d stride must be >= 1"));
    }
    if w.ndim() != 3 || w.shape()[2] == 0 {
        return Err(Error::shape(format!(
            "conv1d weight must be [C_out, C_in, k>=1], got {:?}",
            w.shape()
        )));
    }
    let (c_in, len) = match x.shape() {
        [c, l] | [_, c, l] => (*c, *l),
        _ => {
            return Err(Error::shape(format!(
                "conv1d input must be [C, L] or [B, C, L], got {:?}",
                x.shape()
            )))
        }
    };
    if w.shape()[1] != c_in {
        return Err(Error::shape(format!(
            "conv1d input has {c_in} channels but weight expects {}",
            w.shape()[1]
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [w.shape()[0]] {
            return Err(Error::shape(format!(
                "conv1d bias {:?} does not match {} output channels",
                b.shape(),
                w.shape()[0]
            )));
        }
    }
    let k = w.shape()[2];
    let (pad_left, pad_right) = padding.resolve(len, k, stride);
    if len + pad_left + pad_right < k {
        return Err(Error::shape(format!(
            "conv1d kernel {k} longer than padded input {}",
            len + pad_left + pad_right
        )));
    }
    let geom = ConvGeom {
        stride,
        pad_left,
        pad_right,
    };
    let d = dims(x, w, geom);

    let mut out = vec![F::zero(); d.batch * d.c_out * d.out_len];
    let xd = x.data();
    let wd = w.data();
    for b in 0..d.batch {
        for o in 0..d.c_out {
            let row = &mut out[(b * d.c_out + o) * d.out_len..][..d.out_len];
            if let Some(bias) = bias {
                row.fill(bias[o]);
            }
            for i in 0..d.c_in {
                let xrow = &xd[(b * d.c_in + i) * d.len..][..d.len];
                for kk in 0..d.k {
                    let wv = wd[(o * d.c_in + i) * d.k + kk];
                    let (lo, hi) = valid_range(kk, geom, d.len, d.out_len);
                    if lo >= hi {
                        continue;
                    }
                    let src0 = lo * stride + kk - pad_left;
                    if stride == 1 {
                        for (r, &xv) in row[lo..hi].iter_mut().zip(&xrow[src0..]) {
                            *r += wv * xv;
                        }
                    } else {
                        for (j, r) in row[lo..hi].iter_mut().enumerate() {
                            *r += wv * xrow[src0 + j * stride];
                        }
                    }
                }
            }
        }
    }
    let shape = if x.ndim() == 2 {
        vec![d.c_out, d.out_len]
    } else {
        vec![d.batch, d.c_out, d.out_len]
    };
    Ok((Array::new(shape, out)?, geom))
}

/// Gradients of [`conv1d`] with respect to input, weight and bias, computed
/// only where requested.
#[allow(clippy::type_complexity)]
pub fn conv1d_backward<F: Real>(
    x: &Array<F>,
    w: &Array<F>,
    g: &Array<F>,
    geom: ConvGeom,
    want_x: bool,
    want_w: bool,
    want_b: bool,
) -> (Option<Array<F>>, Option<Array<F>>, Option<Array<F>>) {
    let d = dims(x, w, geom);
    let s = geom.stride;
    let xd = x.data();
    let wd = w.data();
    let gd = g.data();

    let mut gx = want_x.then(|| vec![F::zero(); x.len()]);
    let mut gw = want_w.then(|| vec![F::zero(); w.len()]);
    let mut gb = want_b.then(|| vec![F::zero(); d.c_out]);

    for b in 0..d.batch {
        for o in 0..d.c_out {
            let grow = &gd[(b * d.c_out + o) * d.out_len..][..d.out_len];
            if let Some(gb) = gb.as_mut() {
                gb[o] += grow.iter().copied().sum();
            }
            for i in 0..d.c_in {
                let xoff = (b * d.c_in + i) * d.len;
                for kk in 0..d.k {
                    let (lo, hi) = valid_range(kk, geom, d.len, d.out_len);
                    if lo >= hi {
                        continue;
                    }
                    let src0 = xoff + lo * s + kk - geom.pad_left;
                    let widx = (o * d.c_in + i) * d.k + kk;
                    if let Some(gw) = gw.as_mut() {
                        let mut acc = F::zero();
                        if s == 1 {
                            for (&gv, &xv) in grow[lo..hi].iter().zip(&xd[src0..]) {
                                acc += gv * xv;
                            }
                        } else {
                            for (j, &gv) in grow[lo..hi].iter().enumerate() {
                                acc += gv * xd[src0 + j * s];
                            }
                        }
                        gw[widx] += acc;
                    }
                    if let Some(gx) = gx.as_mut() {
                        let wv = wd[widx];
                        if s == 1 {
                            for (xg, &gv) in gx[src0..].iter_mut().zip(&grow[lo..hi]) {
                                *xg += wv * gv;
                            }
                        } else {
                            for (j, &gv) in grow[lo..hi].iter().enumerate() {
                                gx[src0 + j * s] += wv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    (
        gx.map(|v| Array::new(x.shape().to_vec(), v).expect("gx")),
        gw.map(|v| Array::new(w.shape().to_vec(), v).expect("gw")),
        gb.map(|v| Array::new(vec![d.c_out], v).expect("gb")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(shape: &[usize], v: &[f64]) -> Array<f64> {
        Array::from_f64(shape.to_vec(), v).unwrap()
    }

    /// Direct summation over an explicitly zero-padded copy of the input.
    fn brute(x: &[f64], w: &[f64], pad: (usize, usize), stride: usize) -> Vec<f64> {
        let mut padded = vec![0.0; pad.0];
        padded.extend_from_slice(x);
        padded.extend(std::iter::repeat_n(0.0, pad.1));
        let k = w.len();
        (0..)
            .map(|t| t * stride)
            .take_while(|&p| p + k <= padded.len())
            .map(|p| (0..k).map(|j| padded[p + j] * w[j]).sum())
            .collect()
    }

    #[test]
    fn three_tap_box_filter() {
        let (y, _) = conv1d(
            &arr(&[1, 3], &[1., 2., 3.]),
            &arr(&[1, 1, 3], &[1., 1., 1.]),
            Some(&arr(&[1], &[0.])),
            1,
            Padding::Explicit(1, 1),
        )
        .unwrap();
        assert_eq!(y.data(), &[3., 6., 5.]);
        assert_eq!(
            brute(&[1., 2., 3.], &[1., 1., 1.], (1, 1), 1),
            vec![3., 6., 5.]
        );
    }

    #[test]
    fn identity_kernel_is_identity() {
        let x = arr(&[1, 5], &[0.3, -1.7, 2.25, 1e-9, 4.0]);
        let (y, _) = conv1d(
            &x,
            &arr(&[1, 1, 1], &[1.0]),
            Some(&arr(&[1], &[0.0])),
            1,
            Padding::Same,
        )
        .unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn same_padding_shapes() {
        let x = Array::<f64>::zeros(vec![14, 24]);
        let w = Array::<f64>::zeros(vec![32, 14, 7]);
        let (y, g) = conv1d(&x, &w, None, 1, Padding::Same).unwrap();
        assert_eq!(y.shape(), &[32, 24]);
        assert_eq!((g.pad_left, g.pad_right), (3, 3));

        let x = Array::<f64>::zeros(vec![2, 32, 48]);
        let w = Array::<f64>::zeros(vec![32, 32, 4]);
        let (y, _) = conv1d(&x, &w, None, 2, Padding::Same).unwrap();
        assert_eq!(y.shape(), &[2, 32, 24]);
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let x = Array::<f64>::zeros(vec![3, 8]);
        let w = Array::<f64>::zeros(vec![4, 2, 3]);
        assert!(matches!(
            conv1d(&x, &w, None, 1, Padding::Same),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn strided_matches_brute_force() {
        let x: Vec<f64> = (0..11).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let w = [0.5, -1.0, 2.0, 0.25];
        for stride in 1..4 {
            for pad in [(0, 0), (1, 2), (3, 0)] {
                let (y, _) = conv1d(
                    &arr(&[1, 11], &x),
                    &arr(&[1, 1, 4], &w),
                    None,
                    stride,
                    Padding::Explicit(pad.0, pad.1),
                )
                .unwrap();
                assert_eq!(
                    y.data(),
                    brute(&x, &w, pad, stride).as_slice(),
                    "stride {stride} pad {pad:?}"
                );
            }
        }
    }
}
