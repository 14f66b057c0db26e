use crate::error::{Error, Result};
use crate::numcore::{Array, Real};

pub(crate) fn check_mmd<F: Real>(x: &Array<F>, y: &Array<F>, bandwidths: &[F]) -> Result<()> {
    if x.ndim() != 2 || y.ndim() != 2 || x.shape()[1] != y.shape()[1] {
        return Err(Error::shape(format!(
            "mmd needs [N, D] and [M, D] sample matrices, got {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    if x.shape()[0] == 0 || y.shape()[0] == 0 {
        return Err(Error::validation("mmd needs non-empty sample sets"));
    }
    if bandwidths.is_empty() || bandwidths.iter().any(|&b| !(b > F::zero())) {
        return Err(Error::config("mmd bandwidths must be positive"));
    }
    Ok(())
}

#[inline]
fn sq_dist<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum()
}

#[inline]
fn kernel<F: Real>(d2: F, bandwidths: &[F]) -> F {
    let w = F::one() / F::lit(bandwidths.len() as f64);
    bandwidths
        .iter()
        .map(|&s| (-d2 / (F::lit(2.0) * s * s)).exp())
        .sum::<F>()
        * w
}

fn mean_kernel<F: Real>(a: &Array<F>, b: &Array<F>, bandwidths: &[F]) -> F {
    let d = a.shape()[1];
    let mut total = F::zero();
    for ra in a.data().chunks(d) {
        for rb in b.data().chunks(d) {
            total += kernel(sq_dist(ra, rb), bandwidths);
        }
    }
    total / F::lit((a.shape()[0] * b.shape()[0]) as f64)
}

/// `mean k(x,x') - 2 mean k(x,y) + mean k(y,y')`, the biased (V-statistic)
/// squared MMD under an equal-weight mixture of Gaussian RBF kernels
/// `exp(-|u-v|² / (2σ²))`.
pub fn mmd_value<F: Real>(x: &Array<F>, y: &Array<F>, bandwidths: &[F]) -> F {
    mean_kernel(x, x, bandwidths) - F::lit(2.0) * mean_kernel(x, y, bandwidths)
        + mean_kernel(y, y, bandwidths)
}

/// Gradient of one sample set's rows given the two sets' own-term and
/// cross-term normalisers.
fn grad_side<F: Real>(me: &Array<F>, other: &Array<F>, bandwidths: &[F], upstream: F) -> Array<F> {
    let d = me.shape()[1];
    let n_me = F::lit(me.shape()[0] as f64);
    let n_other = F::lit(other.shape()[0] as f64);
    let w = F::one() / F::lit(bandwidths.len() as f64);
    let self_coef = F::lit(2.0) / (n_me * n_me);
    let cross_coef = F::lit(2.0) / (n_me * n_other);
    let mut out = vec![F::zero(); me.len()];
    // d k(u,v) / du = -k(u,v) (u - v) / σ²
    let dk = |d2: F| -> F {
        bandwidths
            .iter()
            .map(|&s| (-d2 / (F::lit(2.0) * s * s)).exp() / (s * s))
            .sum::<F>()
            * w
    };
    for (a, ra) in me.data().chunks(d).enumerate() {
        let ga = &mut out[a * d..(a + 1) * d];
        for rb in me.data().chunks(d) {
            let c = -self_coef * dk(sq_dist(ra, rb)) * upstream;
            for ((g, &u), &v) in ga.iter_mut().zip(ra).zip(rb) {
                *g += c * (u - v);
            }
        }
        for rb in other.data().chunks(d) {
            let c = cross_coef * dk(sq_dist(ra, rb)) * upstream;
            for ((g, &u), &v) in ga.iter_mut().zip(ra).zip(rb) {
                *g += c * (u - v);
            }
        }
    }
    Array::new(me.shape().to_vec(), out).expect("same shape")
}

pub fn mmd_backward<F: Real>(
    x: &Array<F>,
    y: &Array<F>,
    bandwidths: &[F],
    upstream: F,
) -> (Array<F>, Array<F>) {
    (
        grad_side(x, y, bandwidths, upstream),
        grad_side(y, x, bandwidths, upstream),
    )
}
