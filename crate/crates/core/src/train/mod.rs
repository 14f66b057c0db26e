//! The conditional training loop, its persistent state, and loss logging.

mod checkpoint;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use checkpoint::{decode, encode, load_checkpoint, save_checkpoint, RngState, MAGIC, VERSION};

use crate::data::{NormStats, WindowSet};
use crate::error::{Error, Result};
use crate::losses::{ada_mmd_loss, noise_mse, KernelSpec, LossBreakdown, Omega};
use crate::numcore::{adam_step, AdamConfig, AdamState, Array, Graph, ParamSet};
use crate::schedule::{diffuse, ScheduleSpec, ScheduleTable};
use crate::tdr_unet::{denoise_forward, init_params, Mode, ModelConfig, OMEGA_LOGIT};

/// How ω is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmegaMode {
    /// `sigmoid(omega_logit)`, trained with the network.
    Learned,
    /// A constant in `[0, 1]`; the stored logit is left untouched.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: u64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub schedule: ScheduleSpec,
    pub omega: OmegaMode,
    pub kernel: KernelSpec,
    /// Global gradient-norm bound; `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 70,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            schedule: ScheduleSpec::default(),
            omega: OmegaMode::Learned,
            kernel: KernelSpec::default(),
            grad_clip: Some(1.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be at least 1"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if let OmegaMode::Fixed(w) = self.omega {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::config(format!("fixed omega {w} outside [0, 1]")));
            }
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::config("grad_clip must be positive"));
            }
        }
        self.kernel.validate()?;
        self.schedule.build().map(|_| ())
    }
}

/// Mean loss components over one epoch's batches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: u64,
    pub l_noise: f64,
    pub l_mmd: f64,
    pub l_total: f64,
    pub omega: f64,
}

/// Everything needed to continue or reproduce a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub params: ParamSet<f32>,
    pub adam: AdamState<f32>,
    /// Completed epochs.
    pub epoch: u64,
    /// Completed optimiser steps.
    pub step: u64,
    pub rng: ChaCha8Rng,
    pub stats: Option<NormStats>,
    pub history: Vec<EpochLog>,
}

impl TrainState {
    /// Fresh parameters and optimiser state from `train.seed`.
    pub fn new(model: ModelConfig, train: TrainConfig, stats: Option<NormStats>) -> Result<Self> {
        model.validate()?;
        train.validate()?;
        let params = init_params(&model, train.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
        // stream 0 of this seed is used by parameter init
        rng.set_stream(1);
        Ok(Self {
            model,
            train,
            params,
            adam: AdamState::new(),
            epoch: 0,
            step: 0,
            rng,
            stats,
            history: Vec::new(),
        })
    }

    pub fn schedule(&self) -> Result<ScheduleTable> {
        self.train.schedule.build()
    }
}

fn check_data(model: &ModelConfig, data: &WindowSet) -> Result<()> {
    data.validate()?;
    if data.channels() != model.in_channels || data.length() != model.length {
        return Err(Error::shape(format!(
            "windows are {}x{}, model expects {}x{}",
            data.channels(),
            data.length(),
            model.in_channels,
            model.length
        )));
    }
    Ok(())
}

/// Uniform draw from `1..=steps`.
pub fn sample_timestep<R: Rng>(rng: &mut R, steps: usize) -> usize {
    rng.random_range(1..=steps)
}

/// Clean batch `[B, C, L]`, clamped to the diffusion range.
fn gather(data: &WindowSet, idx: &[usize]) -> (Vec<f32>, Vec<f64>) {
    let mut x0 = Vec::with_capacity(idx.len() * data.windows[0].len());
    let mut conds = Vec::with_capacity(idx.len());
    for &i in idx {
        x0.extend(
            data.windows[i]
                .data()
                .iter()
                .map(|&v| v.clamp(-1.0, 1.0) as f32),
        );
        conds.push(data.conditions[i]);
    }
    (x0, conds)
}

/// Noises a clean batch with per-item timesteps and noise draws.
fn noise_batch<R: Rng>(
    sched: &ScheduleTable,
    x0: &[f32],
    items: usize,
    rng: &mut R,
) -> (Vec<f32>, Vec<f32>, Vec<usize>) {
    let per = x0.len() / items;
    let mut xt = Vec::with_capacity(x0.len());
    let mut eps = Vec::with_capacity(x0.len());
    let mut ts = Vec::with_capacity(items);
    for b in 0..items {
        let t = sample_timestep(rng, sched.steps());
        let ab = sched.alpha_bar(t);
        ts.push(t);
        for &x in &x0[b * per..(b + 1) * per] {
            let e: f32 = StandardNormal.sample(rng);
            eps.push(e);
            xt.push(diffuse(ab, x, e));
        }
    }
    (xt, eps, ts)
}

/// One optimiser step on the windows `idx`.
pub fn train_step(
    state: &mut TrainState,
    sched: &ScheduleTable,
    data: &WindowSet,
    idx: &[usize],
) -> Result<LossBreakdown> {
    let shape = vec![idx.len(), state.model.in_channels, state.model.length];
    let (x0, conds) = gather(data, idx);
    let (xt, eps, ts) = noise_batch(sched, &x0, idx.len(), &mut state.rng);

    let g = Graph::new();
    let p = state.params.record(&g);
    let x = g.constant(Array::new(shape.clone(), xt)?);
    let eps = g.constant(Array::new(shape, eps)?);
    let eps_hat = denoise_forward(
        &state.model,
        &p,
        x,
        &ts,
        &conds,
        Mode::Train(&mut state.rng),
    )?;
    let omega = match state.train.omega {
        OmegaMode::Learned => Omega::Learned(p.get(OMEGA_LOGIT)?),
        OmegaMode::Fixed(w) => Omega::Fixed(w),
    };
    let (total, breakdown) = ada_mmd_loss(eps, eps_hat, omega, &state.train.kernel)?;
    if !breakdown.is_finite() {
        return Err(Error::Training(format!(
            "non-finite loss at epoch {}, step {}: l_noise={}, l_mmd={}, l_total={}, omega={}",
            state.epoch + 1,
            state.step + 1,
            breakdown.l_noise,
            breakdown.l_mmd,
            breakdown.l_total,
            breakdown.omega
        )));
    }
    let mut grads = g.backward(total)?;
    if let OmegaMode::Fixed(_) = state.train.omega {
        grads.remove(OMEGA_LOGIT);
    }
    if let Some(c) = state.train.grad_clip {
        grads.clip_global_norm(c as f32);
    }
    adam_step(
        &mut state.params,
        &grads,
        &mut state.adam,
        &state.train.adam,
    )?;
    state.step += 1;
    Ok(breakdown)
}

/// One pass over `data` in shuffled batches.
pub fn run_epoch(
    state: &mut TrainState,
    sched: &ScheduleTable,
    data: &WindowSet,
) -> Result<EpochLog> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut state.rng);
    let mut sum = LossBreakdown::default();
    let mut batches = 0usize;
    for idx in order.chunks(state.train.batch_size) {
        let b = train_step(state, sched, data, idx)?;
        sum.l_noise += b.l_noise;
        sum.l_mmd += b.l_mmd;
        sum.l_total += b.l_total;
        sum.omega += b.omega;
        batches += 1;
    }
    state.epoch += 1;
    let n = batches as f64;
    let log = EpochLog {
        epoch: state.epoch,
        l_noise: sum.l_noise / n,
        l_mmd: sum.l_mmd / n,
        l_total: sum.l_total / n,
        omega: sum.omega / n,
    };
    state.history.push(log);
    Ok(log)
}

/// Trains until `state.epoch == epochs`, calling `on_epoch` after each one.
pub fn train_until(
    state: &mut TrainState,
    data: &WindowSet,
    epochs: u64,
    mut on_epoch: impl FnMut(&TrainState, &EpochLog) -> Result<()>,
) -> Result<()> {
    check_data(&state.model, data)?;
    let sched = state.schedule()?;
    while state.epoch < epochs {
        let log = run_epoch(state, &sched, data)?;
        on_epoch(state, &log)?;
    }
    Ok(())
}

/// Fresh run for `train.epochs` epochs.
pub fn train(data: &WindowSet, model: ModelConfig, train: TrainConfig) -> Result<TrainState> {
    let epochs = train.epochs;
    let mut state = TrainState::new(model, train, data.stats.clone())?;
    train_until(&mut state, data, epochs, |_, _| Ok(()))?;
    Ok(state)
}

/// Noise-prediction MSE over `draws` noisings of every window, with the
/// noise and timesteps fixed by `seed` so different parameter sets are
/// compared on identical inputs.
pub fn evaluate_noise_loss(
    model: &ModelConfig,
    params: &ParamSet<f32>,
    sched: &ScheduleTable,
    data: &WindowSet,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    check_data(model, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for _ in 0..draws {
        for chunk in idx.chunks(64) {
            let shape = vec![chunk.len(), model.in_channels, model.length];
            let (x0, conds) = gather(data, chunk);
            let (xt, eps, ts) = noise_batch(sched, &x0, chunk.len(), &mut rng);
            let g = Graph::new();
            let p = params.record(&g);
            let x = g.constant(Array::new(shape.clone(), xt)?);
            let eps = g.constant(Array::new(shape, eps)?);
            let eps_hat = denoise_forward(model, &p, x, &ts, &conds, Mode::Eval)?;
            total += noise_mse(eps, eps_hat)?.item() as f64 * chunk.len() as f64;
            count += chunk.len();
        }
    }
    Ok(total / count as f64)
}

/// `epoch,l_noise,l_mmd,l_total,omega` rows.
pub fn loss_csv(history: &[EpochLog]) -> String {
    let mut out = String::from("epoch,l_noise,l_mmd,l_total,omega\n");
    for h in history {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?}",
            h.epoch, h.l_noise, h.l_mmd, h.l_total, h.omega
        )
        .unwrap();
    }
    out
}

pub fn write_loss_csv(history: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, loss_csv(history)).map_err(|e| Error::io(path, e))
}
