use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Array, Gradients, ParamSet, Real};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates per parameter plus the step counter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState<F> {
    pub m: BTreeMap<String, Array<F>>,
    pub v: BTreeMap<String, Array<F>>,
    pub step: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new() -> Self {
        Self {
            m: BTreeMap::new(),
            v: BTreeMap::new(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of every parameter that has a gradient.
/// Parameters absent from `grads` are left untouched (frozen).
pub fn adam_step<F: Real>(
    params: &mut ParamSet<F>,
    grads: &Gradients<F>,
    state: &mut AdamState<F>,
    cfg: &AdamConfig,
) -> Result<()> {
    if !(0.0..1.0).contains(&cfg.beta1) || !(0.0..1.0).contains(&cfg.beta2) {
        return Err(Error::config("Adam betas must lie in [0, 1)"));
    }
    for (name, g) in grads.iter() {
        if !g.is_finite() {
            return Err(Error::Training(format!("non-finite gradient for `{name}`")));
        }
        let p = params.get(name)?;
        if p.shape() != g.shape() {
            return Err(Error::shape(format!(
                "gradient for `{name}` has shape {:?}, parameter {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (F::lit(cfg.beta1), F::lit(cfg.beta2));
    let lr = F::lit(cfg.lr);
    let eps = F::lit(cfg.eps);
    let c1 = F::one() - b1.powi(t);
    let c2 = F::one() - b2.powi(t);
    for (name, g) in grads.iter() {
        let p = params.get_mut(name)?;
        let m = state
            .m
            .entry(name.clone())
            .or_insert_with(|| Array::zeros(g.shape().to_vec()));
        let v = state
            .v
            .entry(name.clone())
            .or_insert_with(|| Array::zeros(g.shape().to_vec()));
        for (((pv, mv), vv), &gv) in p
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g.data())
        {
            *mv = b1 * *mv + (F::one() - b1) * gv;
            *vv = b2 * *vv + (F::one() - b2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Graph;

    fn single(p: f64, g: f64) -> (ParamSet<f64>, Gradients<f64>) {
        let mut params = ParamSet::new();
        params.insert("p", Array::scalar(p));
        let graph = Graph::new();
        let v = graph.param("p", Array::scalar(p));
        let loss = v.scale(g);
        let grads = graph.backward(loss).unwrap();
        (params, grads)
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let (mut params, grads) = single(1.5, 0.0);
        let mut st = AdamState::new();
        adam_step(&mut params, &grads, &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(params.get("p").unwrap().item(), 1.5);
        assert_eq!(st.m["p"].item(), 0.0);
        assert_eq!(st.v["p"].item(), 0.0);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut params, grads) = single(1.0, 1.0);
        let mut st = AdamState::new();
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        adam_step(&mut params, &grads, &mut st, &cfg).unwrap();
        let expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
        assert!((params.get("p").unwrap().item() - expected).abs() < 1e-15);
    }

    #[test]
    fn converges_on_quadratic() {
        // minimise (p - 3)^2
        let mut params = ParamSet::new();
        params.insert("p", Array::scalar(0.0f64));
        let mut st = AdamState::new();
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let start = 9.0;
        for _ in 0..100 {
            let g = Graph::new();
            let vars = params.record(&g);
            let d = vars.get("p").unwrap().affine(1.0, -3.0);
            let loss = d.mul(d).unwrap();
            let grads = g.backward(loss).unwrap();
            adam_step(&mut params, &grads, &mut st, &cfg).unwrap();
        }
        let p = params.get("p").unwrap().item();
        assert!((p - 3.0).powi(2) < 0.01 * start, "p = {p}");
        assert_eq!(st.step, 100);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let (mut params, grads) = single(1.0, f64::NAN);
        let err = adam_step(
            &mut params,
            &grads,
            &mut AdamState::new(),
            &AdamConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("`p`"), "{err}");
    }
}
