//! Conditional ancestral sampling from Gaussian noise.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::numcore::{Array, Graph, ParamSet, Real};
use crate::schedule::{ScheduleSpec, ScheduleTable};
use crate::tdr_unet::{denoise_forward, Mode, ModelConfig};
use crate::train::TrainState;

/// Trajectories denoised together in one forward pass.
pub const SAMPLE_BATCH: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRequest {
    /// One condition per requested sample.
    pub conditions: Vec<f64>,
    pub seed: u64,
    /// Zero the condition embedding while sampling.
    #[serde(default)]
    pub guidance_off: bool,
}

impl SampleRequest {
    pub fn new(conditions: Vec<f64>, seed: u64) -> Self {
        Self {
            conditions,
            seed,
            guidance_off: false,
        }
    }

    pub fn count(&self) -> usize {
        self.conditions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::validation("sample count must be at least 1"));
        }
        if let Some(c) = self.conditions.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::validation(format!("condition {c} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Generated windows, `[C, L]` each.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    /// De-normalized output (equal to `normalized` when no statistics exist).
    pub windows: Vec<Array<f64>>,
    /// Output of the reverse chain before de-normalization.
    pub normalized: Vec<Array<f64>>,
    pub conditions: Vec<f64>,
    /// Denoiser evaluations seen by each trajectory.
    pub forward_calls: usize,
}

/// `x_{t-1} = (x_t - β_t/√(1-ᾱ_t)·ε̂)/√α_t + σ_t·noise`, with
/// `σ_t = √posterior_var[t]` (zero at `t = 1`).
pub fn reverse_step<F: Real>(
    x_t: &Array<F>,
    t: usize,
    eps_hat: &Array<F>,
    table: &ScheduleTable,
    noise: &Array<F>,
) -> Result<Array<F>> {
    let (inv_sqrt_alpha, eps_coef, var) = table.posterior_coeffs(t)?;
    if eps_hat.shape() != x_t.shape() || noise.shape() != x_t.shape() {
        return Err(Error::shape(format!(
            "reverse step needs equal shapes, got {:?}, {:?}, {:?}",
            x_t.shape(),
            eps_hat.shape(),
            noise.shape()
        )));
    }
    let sigma = if t == 1 { 0.0 } else { var.sqrt() };
    let (a, e, s) = (F::lit(inv_sqrt_alpha), F::lit(eps_coef), F::lit(sigma));
    let data = x_t
        .data()
        .iter()
        .zip(eps_hat.data())
        .zip(noise.data())
        .map(|((&x, &eh), &z)| a * (x - e * eh) + s * z)
        .collect();
    Array::new(x_t.shape().to_vec(), data)
}

/// Generator for trajectory `index`; independent of batching and order.
pub fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn normal_block(rngs: &mut [ChaCha8Rng], per: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(rngs.len() * per);
    for rng in rngs {
        out.extend((0..per).map(|_| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            z as f32
        }));
    }
    out
}

/// Runs the chain for trajectories `first..first + conds.len()`.
/// Returns the final batch and the number of denoiser calls.
fn run_chain(
    model: &ModelConfig,
    params: &ParamSet<f32>,
    table: &ScheduleTable,
    conds: &[f64],
    first: usize,
    req: &SampleRequest,
) -> Result<(Array<f32>, usize)> {
    let b = conds.len();
    let per = model.in_channels * model.length;
    let shape = vec![b, model.in_channels, model.length];
    let mut rngs: Vec<ChaCha8Rng> = (0..b)
        .map(|i| trajectory_rng(req.seed, first + i))
        .collect();
    let mut x = Array::new(shape.clone(), normal_block(&mut rngs, per))?;
    let mut calls = 0;
    for t in (1..=table.steps()).rev() {
        let g = Graph::new();
        let p = params.record(&g);
        let mode = if req.guidance_off {
            Mode::Unconditional
        } else {
            Mode::Eval
        };
        let eps_hat =
            denoise_forward(model, &p, g.constant(x.clone()), &vec![t; b], conds, mode)?.value();
        calls += 1;
        let noise = if t == 1 {
            Array::zeros(shape.clone())
        } else {
            Array::new(shape.clone(), normal_block(&mut rngs, per))?
        };
        x = reverse_step(&x, t, &eps_hat, table, &noise)?;
    }
    Ok((x, calls))
}

/// Samples with explicit parts; `batch` trajectories share a forward pass.
pub fn sample_with(
    model: &ModelConfig,
    params: &ParamSet<f32>,
    table: &ScheduleTable,
    stats: Option<&NormStats>,
    req: &SampleRequest,
    batch: usize,
) -> Result<SampleSet> {
    req.validate()?;
    model.validate()?;
    let batch = batch.max(1);
    let starts: Vec<usize> = (0..req.count()).step_by(batch).collect();
    let chunks = starts
        .par_iter()
        .map(|&s| {
            let end = (s + batch).min(req.count());
            run_chain(model, params, table, &req.conditions[s..end], s, req)
        })
        .collect::<Result<Vec<_>>>()?;

    let per = model.in_channels * model.length;
    let mut normalized = Vec::with_capacity(req.count());
    let mut forward_calls = 0;
    for (x, calls) in chunks {
        forward_calls = calls;
        for item in x.data().chunks(per) {
            let v: Vec<f64> = item.iter().map(|&v| v as f64).collect();
            normalized.push(Array::new(vec![model.in_channels, model.length], v)?);
        }
    }
    let windows = match stats {
        Some(s) => normalized
            .iter()
            .map(|w| s.denormalize(w))
            .collect::<Result<_>>()?,
        None => normalized.clone(),
    };
    Ok(SampleSet {
        windows,
        normalized,
        conditions: req.conditions.clone(),
        forward_calls,
    })
}

/// Samples from a trained state using its schedule and stored statistics.
pub fn sample(state: &TrainState, req: &SampleRequest) -> Result<SampleSet> {
    let table = state.schedule()?;
    sample_with(
        &state.model,
        &state.params,
        &table,
        state.stats.as_ref(),
        req,
        SAMPLE_BATCH,
    )
}

/// Provenance of a sample file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifest {
    pub seed: u64,
    pub checkpoint_sha256: String,
    pub schedule: ScheduleSpec,
    pub count: usize,
    pub guidance_off: bool,
    pub conditions: Vec<f64>,
}

/// Long-format CSV: `sample_id,channel,t_index,value,condition`.
pub fn samples_csv(windows: &[Array<f64>], conditions: &[f64]) -> Result<String> {
    if windows.len() != conditions.len() {
        return Err(Error::shape(format!(
            "{} windows but {} conditions",
            windows.len(),
            conditions.len()
        )));
    }
    let mut out = String::from("sample_id,channel,t_index,value,condition\n");
    for (id, (w, c)) in windows.iter().zip(conditions).enumerate() {
        if w.ndim() != 2 {
            return Err(Error::shape(format!(
                "sample {id} is not [C, L]: {:?}",
                w.shape()
            )));
        }
        let len = w.shape()[1];
        for (i, v) in w.data().iter().enumerate() {
            writeln!(out, "{id},{},{},{v:?},{c:?}", i / len, i % len).unwrap();
        }
    }
    Ok(out)
}

pub fn write_samples_csv(
    windows: &[Array<f64>],
    conditions: &[f64],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, samples_csv(windows, conditions)?).map_err(|e| Error::io(path, e))
}

/// Inverse of [`samples_csv`]. Rows may come in any order but every
/// `(sample, channel, t)` cell must appear exactly once.
pub fn parse_samples_csv(text: &str) -> Result<(Vec<Array<f64>>, Vec<f64>)> {
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "sample_id,channel,t_index,value,condition" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected header sample_id,channel,t_index,value,condition".into(),
            })
        }
    }
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if cells.len() != 5 {
            return Err(bad(format!("expected 5 columns, found {}", cells.len())));
        }
        let idx = |k: usize| {
            cells[k]
                .parse::<usize>()
                .map_err(|_| bad(format!("bad index `{}`", cells[k])))
        };
        let num = |k: usize| {
            cells[k]
                .parse::<f64>()
                .map_err(|_| bad(format!("bad number `{}`", cells[k])))
        };
        rows.push((idx(0)?, idx(1)?, idx(2)?, num(3)?, num(4)?, line_no));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no sample rows".into(),
        });
    }
    let n = rows.iter().map(|r| r.0).max().unwrap() + 1;
    let c = rows.iter().map(|r| r.1).max().unwrap() + 1;
    let l = rows.iter().map(|r| r.2).max().unwrap() + 1;
    let mut data = vec![vec![f64::NAN; c * l]; n];
    let mut seen = vec![vec![false; c * l]; n];
    let mut conds = vec![None; n];
    for &(s, ch, t, v, cond, line) in &rows {
        let k = ch * l + t;
        if seen[s][k] {
            return Err(Error::Parse {
                line,
                message: format!("duplicate cell ({s}, {ch}, {t})"),
            });
        }
        seen[s][k] = true;
        data[s][k] = v;
        match conds[s] {
            None => conds[s] = Some(cond),
            Some(prev) if prev != cond => {
                return Err(Error::Parse {
                    line,
                    message: format!("sample {s} has conditions {prev} and {cond}"),
                })
            }
            _ => {}
        }
    }
    if let Some(s) = seen.iter().position(|row| row.iter().any(|x| !x)) {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!("sample {s} is missing cells"),
        });
    }
    let windows = data
        .into_iter()
        .map(|d| Array::new(vec![c, l], d))
        .collect::<Result<_>>()?;
    Ok((windows, conds.into_iter().map(|c| c.unwrap()).collect()))
}

pub fn load_samples_csv(path: impl AsRef<Path>) -> Result<(Vec<Array<f64>>, Vec<f64>)> {
    let path = path.as_ref();
    parse_samples_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
