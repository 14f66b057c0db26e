use crate::error::{Error, Result};
use crate::numcore::{Array, Real};

fn layout(shape: &[usize]) -> Option<(usize, usize, usize)> {
    match shape {
        [c, l] => Some((1, *c, *l)),
        [b, c, l] => Some((*b, *c, *l)),
        _ => None,
    }
}

/// Group normalization over `[C, L]` or `[B, C, L]`. Statistics are taken
/// per sample over each group of `C / groups` channels and all time steps.
/// Returns the output and the per-(sample, group) `(mean, 1/std)` pairs.
#[allow(clippy::type_complexity)]
pub fn group_norm<F: Real>(
    x: &Array<F>,
    groups: usize,
    gamma: &Array<F>,
    beta: &Array<F>,
    eps: F,
) -> Result<(Array<F>, Vec<(F, F)>)> {
    let (b, c, l) = layout(x.shape())
        .ok_or_else(|| Error::shape(format!("group_norm input {:?}", x.shape())))?;
    if groups == 0 || c % groups != 0 {
        return Err(Error::config(format!(
            "{c} channels are not divisible into {groups} groups"
        )));
    }
    if eps <= F::zero() {
        return Err(Error::config("group_norm eps must be positive"));
    }
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::shape(format!(
            "group_norm affine shapes {:?}/{:?} for {c} channels",
            gamma.shape(),
            beta.shape()
        )));
    }
    let cg = c / groups;
    let n = F::lit((cg * l) as f64);
    let mut out = vec![F::zero(); x.len()];
    let mut stats = Vec::with_capacity(b * groups);
    for bi in 0..b {
        for gi in 0..groups {
            let start = (bi * c + gi * cg) * l;
            let seg = &x.data()[start..start + cg * l];
            let mean = seg.iter().copied().sum::<F>() / n;
            let var = seg.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / n;
            let rstd = F::one() / (var + eps).sqrt();
            stats.push((mean, rstd));
            for ci in 0..cg {
                let ch = gi * cg + ci;
                let (gm, bt) = (gamma[ch], beta[ch]);
                let off = start + ci * l;
                for (o, &v) in out[off..off + l].iter_mut().zip(&x.data()[off..off + l]) {
                    *o = (v - mean) * rstd * gm + bt;
                }
            }
        }
    }
    Ok((Array::new(x.shape().to_vec(), out)?, stats))
}

pub fn group_norm_backward<F: Real>(
    x: &Array<F>,
    gamma: &Array<F>,
    g: &Array<F>,
    groups: usize,
    stats: &[(F, F)],
) -> (Array<F>, Array<F>, Array<F>) {
    let (b, c, l) = layout(x.shape()).expect("checked in forward");
    let cg = c / groups;
    let n = F::lit((cg * l) as f64);
    let mut gx = vec![F::zero(); x.len()];
    let mut ggamma = vec![F::zero(); c];
    let mut gbeta = vec![F::zero(); c];
    for bi in 0..b {
        for gi in 0..groups {
            let (mean, rstd) = stats[bi * groups + gi];
            let start = (bi * c + gi * cg) * l;
            // dxhat = g * gamma; dx = rstd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
            let mut sum_dxhat = F::zero();
            let mut sum_dxhat_xhat = F::zero();
            for ci in 0..cg {
                let ch = gi * cg + ci;
                let off = start + ci * l;
                for t in 0..l {
                    let xhat = (x[off + t] - mean) * rstd;
                    let gv = g[off + t];
                    ggamma[ch] += gv * xhat;
                    gbeta[ch] += gv;
                    let dxhat = gv * gamma[ch];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                }
            }
            let m1 = sum_dxhat / n;
            let m2 = sum_dxhat_xhat / n;
            for ci in 0..cg {
                let ch = gi * cg + ci;
                let off = start + ci * l;
                for t in 0..l {
                    let xhat = (x[off + t] - mean) * rstd;
                    let dxhat = g[off + t] * gamma[ch];
                    gx[off + t] = rstd * (dxhat - m1 - xhat * m2);
                }
            }
        }
    }
    (
        Array::new(x.shape().to_vec(), gx).expect("gx"),
        Array::new(vec![c], ggamma).expect("ggamma"),
        Array::new(vec![c], gbeta).expect("gbeta"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(x: &[f64], c: usize, groups: usize) -> Vec<f64> {
        let l = x.len() / c;
        let x = Array::from_f64(vec![c, l], x).unwrap();
        let (y, _) = group_norm(
            &x,
            groups,
            &Array::ones(vec![c]),
            &Array::zeros(vec![c]),
            1e-5,
        )
        .unwrap();
        y.into_data()
    }

    #[test]
    fn constant_input_maps_to_beta() {
        assert!(run(&[3.0; 8], 2, 1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symmetric_pair_is_already_normal() {
        let y = run(&[-1.0, 1.0], 1, 1);
        assert!((y[0] + 1.0).abs() < 1e-5 && (y[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn matches_direct_moments() {
        let y = run(&[0.0, 2.0, 4.0, 6.0], 1, 1);
        // mean 3, biased variance 5
        let std = (5.0f64 + 1e-5).sqrt();
        for (v, x) in y.iter().zip([0.0, 2.0, 4.0, 6.0]) {
            assert!((v - (x - 3.0) / std).abs() < 1e-12);
        }
    }

    #[test]
    fn indivisible_groups_rejected() {
        let x = Array::<f64>::zeros(vec![6, 4]);
        let r = group_norm(&x, 4, &Array::ones(vec![6]), &Array::zeros(vec![6]), 1e-5);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
