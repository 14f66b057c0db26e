//! Central finite-difference checks of recorded gradients.
//!
//! The numeric side only ever evaluates forward passes, so it stays
//! independent of every backward rule it is checking.

use crate::error::Result;
use crate::numcore::{Graph, ParamSet, ParamVars, Var};

/// Per-parameter comparison of analytic and numeric gradients.
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub name: String,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)` over the whole
    /// parameter array (L2 norms); zero when both are below `1e-10`.
    pub rel_error: f64,
    pub analytic_norm: f64,
}

/// Compares `backward` against central differences with step `h` for every
/// parameter in `params`. `loss` must build a scalar from the recorded
/// parameters and be deterministic.
pub fn check_gradients<L>(params: &ParamSet<f64>, h: f64, loss: L) -> Result<Vec<GradCheck>>
where
    L: for<'g> Fn(&'g Graph<f64>, &ParamVars<'g, f64>) -> Result<Var<'g, f64>>,
{
    check_coordinates(params, h, |_, n| (0..n).collect(), loss)
}

/// Like [`check_gradients`] but probes at most `per_param` coordinates of
/// each parameter, drawn without replacement from `rng`. Errors are
/// measured over the probed coordinates only.
pub fn check_gradients_sampled<L, R>(
    params: &ParamSet<f64>,
    h: f64,
    per_param: usize,
    rng: &mut R,
    loss: L,
) -> Result<Vec<GradCheck>>
where
    L: for<'g> Fn(&'g Graph<f64>, &ParamVars<'g, f64>) -> Result<Var<'g, f64>>,
    R: rand::Rng,
{
    check_coordinates(
        params,
        h,
        |_, n| {
            let mut idx = rand::seq::index::sample(rng, n, per_param.min(n)).into_vec();
            idx.sort_unstable();
            idx
        },
        loss,
    )
}

fn check_coordinates<L, S>(
    params: &ParamSet<f64>,
    h: f64,
    mut select: S,
    loss: L,
) -> Result<Vec<GradCheck>>
where
    L: for<'g> Fn(&'g Graph<f64>, &ParamVars<'g, f64>) -> Result<Var<'g, f64>>,
    S: FnMut(&str, usize) -> Vec<usize>,
{
    let graph = Graph::new();
    let vars = params.record(&graph);
    let out = loss(&graph, &vars)?;
    let grads = graph.backward(out)?;

    let eval = |p: &ParamSet<f64>| -> Result<f64> {
        let g = Graph::new();
        let v = p.record(&g);
        Ok(loss(&g, &v)?.item())
    };

    let mut report = Vec::new();
    let mut probe = params.clone();
    for (name, value) in params.iter() {
        let analytic = grads.get(name).expect("every parameter has a gradient");
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for i in select(name, value.len()) {
            let orig = value[i];
            probe.get_mut(name)?.data_mut()[i] = orig + h;
            let up = eval(&probe)?;
            probe.get_mut(name)?.data_mut()[i] = orig - h;
            let down = eval(&probe)?;
            probe.get_mut(name)?.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[i];
            diff2 += (a - numeric).powi(2);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        let scale = a2.sqrt().max(n2.sqrt());
        let rel_error = if scale < 1e-10 {
            0.0
        } else {
            diff2.sqrt() / scale
        };
        report.push(GradCheck {
            name: name.clone(),
            rel_error,
            analytic_norm: a2.sqrt(),
        });
    }
    Ok(report)
}

/// Largest relative error in a report.
pub fn max_rel_error(report: &[GradCheck]) -> f64 {
    report.iter().map(|r| r.rel_error).fold(0.0, f64::max)
}
