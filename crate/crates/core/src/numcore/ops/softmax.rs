use crate::error::{Error, Result};
use crate::numcore::array::split_axis;
use crate::numcore::{Array, Real};

/// Softmax along `axis`, stabilised by subtracting the per-slice maximum.
pub fn softmax<F: Real>(x: &Array<F>, axis: usize) -> Result<Array<F>> {
    if axis >= x.ndim() {
        return Err(Error::shape(format!(
            "softmax axis {axis} out of range for {:?}",
            x.shape()
        )));
    }
    let (outer, n, inner) = split_axis(x.shape(), axis);
    let xd = x.data();
    let mut out = vec![F::zero(); x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |j: usize| (o * n + j) * inner + i;
            let m = (0..n).map(|j| xd[idx(j)]).fold(F::neg_infinity(), F::max);
            let mut total = F::zero();
            for j in 0..n {
                let e = (xd[idx(j)] - m).exp();
                out[idx(j)] = e;
                total += e;
            }
            for j in 0..n {
                out[idx(j)] /= total;
            }
        }
    }
    Array::new(x.shape().to_vec(), out)
}

pub fn softmax_backward<F: Real>(y: &Array<F>, g: &Array<F>, axis: usize) -> Array<F> {
    let (outer, n, inner) = split_axis(y.shape(), axis);
    let mut out = vec![F::zero(); y.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |j: usize| (o * n + j) * inner + i;
            let dot: F = (0..n).map(|j| y[idx(j)] * g[idx(j)]).sum();
            for j in 0..n {
                out[idx(j)] = y[idx(j)] * (g[idx(j)] - dot);
            }
        }
    }
    Array::new(y.shape().to_vec(), out).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_row() {
        let y = softmax(&Array::<f64>::full(vec![4], 0.7), 0).unwrap();
        assert!(y.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn large_logit_does_not_overflow() {
        let y = softmax(&Array::<f64>::from_f64(vec![2], &[1e4, 0.0]).unwrap(), 0).unwrap();
        assert_eq!(y.data(), &[1.0, 0.0]);
    }

    #[test]
    fn log_two_gives_thirds() {
        let y = softmax(
            &Array::<f64>::from_f64(vec![2], &[0.0, 2f64.ln()]).unwrap(),
            0,
        )
        .unwrap();
        assert!((y[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((y[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn middle_axis_sums_to_one() {
        let x = Array::<f64>::from_f64(
            vec![2, 3, 2],
            &[1., -2., 3., 0.5, 9., 4., -1., 0., 2., 2., 7., -7.],
        )
        .unwrap();
        let y = softmax(&x, 1).unwrap();
        for o in 0..2 {
            for i in 0..2 {
                let s: f64 = (0..3).map(|j| y.get(&[o, j, i]).unwrap()).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}
