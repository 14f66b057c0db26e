use diffmts_core::losses::{
    ada_mmd_loss, median_pairwise_distance, mmd, mmd_value, noise_mse, Bandwidth, KernelSpec, Omega,
};
use diffmts_core::numcore::gradcheck::{check_gradients, max_rel_error};
use diffmts_core::numcore::{Array, Graph, ParamSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn randn(rng: &mut ChaCha8Rng, shape: Vec<usize>, shift: f64) -> Array<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| StandardNormal.sample(rng))
        .map(|v: f64| v + shift)
        .collect();
    Array::new(shape, data).unwrap()
}

/// Independent double-loop kernel sums with its own median computation.
fn brute_mmd(x: &[Vec<f64>], y: &[Vec<f64>], scales: &[f64], fixed: Option<f64>) -> f64 {
    let dist = |a: &Vec<f64>, b: &Vec<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += (a[i] - b[i]) * (a[i] - b[i]);
        }
        s.sqrt()
    };
    let base = match fixed {
        Some(b) => b,
        None => {
            let pooled: Vec<&Vec<f64>> = x.iter().chain(y.iter()).collect();
            let mut ds = Vec::new();
            for i in 0..pooled.len() {
                for j in 0..i {
                    ds.push(dist(pooled[i], pooled[j]));
                }
            }
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let med = if ds.is_empty() {
                1.0
            } else if ds.len() % 2 == 1 {
                ds[ds.len() / 2]
            } else {
                (ds[ds.len() / 2 - 1] + ds[ds.len() / 2]) / 2.0
            };
            if med > 0.0 {
                med
            } else {
                1.0
            }
        }
    };
    let k = |a: &Vec<f64>, b: &Vec<f64>| -> f64 {
        let d = dist(a, b);
        let mut acc = 0.0;
        for s in scales {
            let sigma = s * base;
            acc += (-(d * d) / (2.0 * sigma * sigma)).exp();
        }
        acc / scales.len() as f64
    };
    let mut kxx = 0.0;
    for a in x {
        for b in x {
            kxx += k(a, b);
        }
    }
    let mut kxy = 0.0;
    for a in x {
        for b in y {
            kxy += k(a, b);
        }
    }
    let mut kyy = 0.0;
    for a in y {
        for b in y {
            kyy += k(a, b);
        }
    }
    let (n, m) = (x.len() as f64, y.len() as f64);
    kxx / (n * n) - 2.0 * kxy / (n * m) + kyy / (m * m)
}

fn rows(a: &Array<f64>) -> Vec<Vec<f64>> {
    let d: usize = a.shape()[1..].iter().product();
    a.data().chunks(d).map(|c| c.to_vec()).collect()
}

#[test]
fn mmd_matches_brute_force_kernel_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..300 {
        let n = rng.random_range(1..=16);
        let m = rng.random_range(1..=16);
        let d = rng.random_range(1..=6);
        let x = randn(&mut rng, vec![n, d], 0.0);
        let shift = rng.random_range(-1.0..1.0);
        let y = randn(&mut rng, vec![m, d], shift);
        let (kernel, fixed) = if case % 3 == 0 {
            let b = rng.random_range(0.3..3.0);
            (KernelSpec::single(b), Some(b))
        } else {
            (KernelSpec::default(), None)
        };
        let got = mmd_value(&x, &y, &kernel).unwrap();
        let want = brute_mmd(&rows(&x), &rows(&y), &kernel.scales, fixed);
        assert!((got - want).abs() < 1e-10, "case {case}: {got} vs {want}");
    }
}

#[test]
fn mmd_of_identical_sets_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(1..=16);
        let x = randn(&mut rng, vec![n, 3, 4], 0.0);
        assert_eq!(mmd_value(&x, &x, &KernelSpec::default()).unwrap(), 0.0);
    }
}

#[test]
fn mmd_separates_shifted_gaussians() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = randn(&mut rng, vec![256, 1], 0.0);
    let b = randn(&mut rng, vec![256, 1], 0.0);
    let c = randn(&mut rng, vec![256, 1], 3.0);
    let k = KernelSpec::default();
    let same = mmd_value(&a, &b, &k).unwrap();
    let apart = mmd_value(&a, &c, &k).unwrap();
    assert!(apart > same, "{apart} <= {same}");
}

#[test]
fn mse_matches_two_pass_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let len = rng.random_range(1..200);
        let a = randn(&mut rng, vec![len], 0.0);
        let b = randn(&mut rng, vec![len], 0.0);
        let g = Graph::new();
        let got = noise_mse(g.constant(a.clone()), g.constant(b.clone()))
            .unwrap()
            .item();
        // pairwise squared differences first, then a compensated sum
        let sq: Vec<f64> = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .collect();
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for v in sq {
            let yv = v - c;
            let t = s + yv;
            c = (t - s) - yv;
            s = t;
        }
        assert!((got - s / len as f64).abs() < 1e-12);
    }
}

#[test]
fn omega_logit_endpoints_and_midpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let e = randn(&mut rng, vec![6, 2, 5], 0.0);
    let h = randn(&mut rng, vec![6, 2, 5], 0.2);
    let k = KernelSpec::default();
    for (logit, check) in [(-30.0, 0), (30.0, 1), (0.0, 2)] {
        let g = Graph::new();
        let (ev, hv) = (g.constant(e.clone()), g.constant(h.clone()));
        let l = g.constant(Array::scalar(logit));
        let (total, b) = ada_mmd_loss(ev, hv, Omega::Learned(l), &k).unwrap();
        assert_eq!(total.item(), b.l_total);
        assert!((b.l_total - ((1.0 - b.omega) * b.l_noise + b.omega * b.l_mmd)).abs() < 1e-12);
        match check {
            0 => assert!((b.l_total - b.l_noise).abs() < 1e-12),
            1 => assert!((b.l_total - b.l_mmd).abs() < 1e-12),
            _ => assert!((b.l_total - 0.5 * (b.l_noise + b.l_mmd)).abs() < 1e-12),
        }
    }
}

#[test]
fn total_loss_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..20 {
        let b = rng.random_range(2..6);
        let eps = randn(&mut rng, vec![b, 2, 3], 0.0);
        let mut params = ParamSet::new();
        params.insert("eps_hat", randn(&mut rng, vec![b, 2, 3], 0.3));
        params.insert("logit", Array::scalar(rng.random_range(-3.0..3.0)));
        // fixed bandwidth: the median heuristic is piecewise constant and
        // excluded from the gradient by design
        let kernel = KernelSpec {
            scales: vec![0.5, 1.0, 2.0],
            bandwidth: Bandwidth::Fixed(2.0),
        };
        let report = check_gradients(&params, 1e-5, |g, v| {
            let e = g.constant(eps.clone());
            let (total, _) = ada_mmd_loss(
                e,
                v.get("eps_hat")?,
                Omega::Learned(v.get("logit")?),
                &kernel,
            )?;
            Ok(total)
        })
        .unwrap();
        assert!(max_rel_error(&report) < 1e-4, "case {case}: {report:?}");
    }
}

#[test]
fn mmd_gradient_reaches_predictions() {
    let g = Graph::<f64>::new();
    let n = g.constant(Array::from_f64(vec![2, 1], &[0.0, 1.0]).unwrap());
    let m = g.param("m", Array::from_f64(vec![2, 1], &[0.5, 2.0]).unwrap());
    let l = mmd(n, m, &KernelSpec::default()).unwrap();
    let grads = g.backward(l).unwrap();
    assert!(grads.get("m").unwrap().data().iter().any(|v| *v != 0.0));
}

#[test]
fn median_rejects_mismatched_dims() {
    let a = Array::<f64>::zeros(vec![2, 3]);
    let b = Array::<f64>::zeros(vec![2, 4]);
    assert!(median_pairwise_distance(&a, &b).is_err());
}

proptest! {
    #[test]
    fn mmd_is_symmetric_and_non_negative(
        xs in prop::collection::vec(-5.0f64..5.0, 2..32),
        ys in prop::collection::vec(-5.0f64..5.0, 2..32),
    ) {
        let x = Array::new(vec![xs.len() / 2, 2], xs[..xs.len() / 2 * 2].to_vec()).unwrap();
        let y = Array::new(vec![ys.len() / 2, 2], ys[..ys.len() / 2 * 2].to_vec()).unwrap();
        let k = KernelSpec::default();
        let xy = mmd_value(&x, &y, &k).unwrap();
        let yx = mmd_value(&y, &x, &k).unwrap();
        prop_assert!(xy >= -1e-12);
        prop_assert!((xy - yx).abs() < 1e-12);
    }
}
