//! Two-layer LSTM evaluator networks built on the tape.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{adam_step, AdamConfig, AdamState, Array, Graph, ParamSet, ParamVars, Var};

/// Settings shared by the classifier and the regressor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluatorConfig {
    pub hidden: usize,
    pub layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            layers: 2,
            epochs: 40,
            batch_size: 32,
            lr: 1e-3,
        }
    }
}

impl EvaluatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.layers == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config(
                "evaluator sizes and epochs must be at least 1",
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("evaluator learning rate must be positive"));
        }
        Ok(())
    }
}

/// Uniform `±1/√hidden` weights; forget-gate biases start at 1.
pub fn init_lstm(inputs: usize, cfg: &EvaluatorConfig, seed: u64) -> ParamSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = cfg.hidden;
    let bound = 1.0 / (h as f64).sqrt();
    let mut uniform =
        |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
    let mut p = ParamSet::new();
    for layer in 0..cfg.layers {
        let fan_in = if layer == 0 { inputs } else { h } + h;
        p.insert(
            format!("lstm.{layer}.w"),
            Array::new(vec![fan_in, 4 * h], uniform(fan_in * 4 * h)).unwrap(),
        );
        let mut b = uniform(4 * h);
        b[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
        p.insert(
            format!("lstm.{layer}.b"),
            Array::new(vec![4 * h], b).unwrap(),
        );
    }
    p.insert("out.w", Array::new(vec![h, 1], uniform(h)).unwrap());
    p.insert("out.b", Array::new(vec![1], uniform(1)).unwrap());
    p
}

/// Scalar output `[B, 1]` from the final hidden state. `steps[t]` is the
/// `[B, C]` input at time `t`.
pub fn lstm_forward<'g>(
    p: &ParamVars<'g, f64>,
    steps: &[Var<'g, f64>],
    cfg: &EvaluatorConfig,
) -> Result<Var<'g, f64>> {
    let g = p.graph();
    let batch = steps
        .first()
        .ok_or_else(|| Error::shape("lstm needs at least one time step"))?
        .shape()[0];
    let h_dim = cfg.hidden;
    let mut inputs = steps.to_vec();
    for layer in 0..cfg.layers {
        let w = p.get(&format!("lstm.{layer}.w"))?;
        let b = p.get(&format!("lstm.{layer}.b"))?;
        let mut h = g.constant(Array::zeros(vec![batch, h_dim]));
        let mut c = h;
        let mut outputs = Vec::with_capacity(inputs.len());
        for &x in &inputs {
            let z = Var::concat(&[x, h], 1)?.matmul(w)?.add_row_bias(b)?;
            let i = z.slice(1, 0, h_dim)?.sigmoid();
            let f = z.slice(1, h_dim, h_dim)?.sigmoid();
            let cand = z.slice(1, 2 * h_dim, h_dim)?.tanh();
            let o = z.slice(1, 3 * h_dim, h_dim)?.sigmoid();
            c = f.mul(c)?.add(i.mul(cand)?)?;
            h = o.mul(c.tanh())?;
            outputs.push(h);
        }
        inputs = outputs;
    }
    let last = *inputs.last().unwrap();
    last.matmul(p.get("out.w")?)?.add_row_bias(p.get("out.b")?)
}

/// Time-major inputs for windows `[C, L]`: one `[B, C]` constant per step.
fn step_inputs<'g>(g: &'g Graph<f64>, windows: &[&Array<f64>]) -> Result<Vec<Var<'g, f64>>> {
    let (c, l) = (windows[0].shape()[0], windows[0].shape()[1]);
    let mut steps = Vec::with_capacity(l);
    for t in 0..l {
        let mut data = Vec::with_capacity(windows.len() * c);
        for w in windows {
            data.extend((0..c).map(|ch| w.data()[ch * l + t]));
        }
        steps.push(g.constant(Array::new(vec![windows.len(), c], data)?));
    }
    Ok(steps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Logistic loss on 0/1 targets; outputs are logits.
    Classify,
    /// Squared error on real targets.
    Regress,
}

/// A trained evaluator.
pub struct Lstm {
    pub params: ParamSet<f64>,
    pub cfg: EvaluatorConfig,
    pub objective: Objective,
}

fn loss<'g>(out: Var<'g, f64>, y: Var<'g, f64>, objective: Objective) -> Result<Var<'g, f64>> {
    match objective {
        // softplus(z) - y·z
        Objective::Classify => Ok(out
            .activation(crate::numcore::Activation::Softplus)
            .sub(y.mul(out)?)?
            .mean()),
        Objective::Regress => {
            let d = out.sub(y)?;
            Ok(d.mul(d)?.mean())
        }
    }
}

impl Lstm {
    /// Trains on `windows` (all `[C, L]`) against `targets`, shuffling with
    /// `seed`. When `val` is given, the parameters after the epoch with the
    /// best validation score are kept.
    pub fn fit(
        windows: &[&Array<f64>],
        targets: &[f64],
        objective: Objective,
        cfg: &EvaluatorConfig,
        seed: u64,
        val: Option<(&[&Array<f64>], &[f64])>,
    ) -> Result<Self> {
        cfg.validate()?;
        if windows.is_empty() || windows.len() != targets.len() {
            return Err(Error::validation(format!(
                "evaluator needs matching non-empty inputs, got {} windows and {} targets",
                windows.len(),
                targets.len()
            )));
        }
        let shape = windows[0].shape().to_vec();
        if shape.len() != 2 || windows.iter().any(|w| w.shape() != shape.as_slice()) {
            return Err(Error::shape(
                "evaluator windows must share one [C, L] shape",
            ));
        }
        let mut model = Self {
            params: init_lstm(shape[0], cfg, seed),
            cfg: cfg.clone(),
            objective,
        };
        let adam_cfg = AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        };
        let mut adam = AdamState::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut order: Vec<usize> = (0..windows.len()).collect();
        let mut best: Option<(f64, ParamSet<f64>)> = None;
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for idx in order.chunks(cfg.batch_size) {
                let g = Graph::new();
                let p = model.params.record(&g);
                let batch: Vec<&Array<f64>> = idx.iter().map(|&i| windows[i]).collect();
                let ys: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
                let out = lstm_forward(&p, &step_inputs(&g, &batch)?, cfg)?;
                let y = g.constant(Array::new(vec![idx.len(), 1], ys)?);
                let l = loss(out, y, objective)?;
                let grads = g.backward(l)?;
                adam_step(&mut model.params, &grads, &mut adam, &adam_cfg)?;
            }
            if let Some((vw, vt)) = val {
                let score = model.score(vw, vt)?;
                if best.as_ref().is_none_or(|(b, _)| score > *b) {
                    best = Some((score, model.params.clone()));
                }
            }
        }
        if let Some((_, params)) = best {
            model.params = params;
        }
        Ok(model)
    }

    /// Raw outputs (logits or regression values).
    pub fn predict(&self, windows: &[&Array<f64>]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(256) {
            let g = Graph::new();
            let p = self.params.record(&g);
            let y = lstm_forward(&p, &step_inputs(&g, chunk)?, &self.cfg)?;
            out.extend_from_slice(y.value().data());
        }
        Ok(out)
    }

    /// Higher is better: accuracy for classifiers, negative RMSE for
    /// regressors.
    pub fn score(&self, windows: &[&Array<f64>], targets: &[f64]) -> Result<f64> {
        if windows.is_empty() {
            return Ok(0.0);
        }
        let pred = self.predict(windows)?;
        Ok(match self.objective {
            Objective::Classify => accuracy(&pred, targets),
            Objective::Regress => -rmse(&pred, targets),
        })
    }
}

/// Fraction of logits on the correct side of zero.
pub fn accuracy(logits: &[f64], labels: &[f64]) -> f64 {
    let hits = logits
        .iter()
        .zip(labels)
        .filter(|(z, y)| (**z > 0.0) == (**y > 0.5))
        .count();
    hits as f64 / logits.len() as f64
}

pub fn rmse(pred: &[f64], target: &[f64]) -> f64 {
    let se: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    (se / pred.len() as f64).sqrt()
}
