//! Evaluation protocol: discriminative and predictive scores, elastic
//! distances, and PCA export.

mod distance;
mod lstm;
mod pca;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use distance::{distance_report, dtw, frechet, mean_nearest_dtw, DistanceReport};
pub use lstm::{accuracy, init_lstm, lstm_forward, rmse, EvaluatorConfig, Lstm, Objective};
pub use pca::{pca_project, Projection};

use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::numcore::Array;

/// Minimum windows per class for the discriminative score.
pub const MIN_PER_CLASS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    /// 70/10/20 of `n`, rounding the first two.
    pub fn of(n: usize) -> Self {
        let train = (0.7 * n as f64).round() as usize;
        let val = ((0.1 * n as f64).round() as usize).min(n - train);
        Self {
            train,
            val,
            test: n - train - val,
        }
    }
}

fn same_shape(a: &WindowSet, b: &WindowSet) -> Result<()> {
    a.validate()?;
    b.validate()?;
    if a.channels() != b.channels() || a.length() != b.length() {
        return Err(Error::validation(format!(
            "real windows are {}x{} but synthetic windows are {}x{}",
            a.channels(),
            a.length(),
            b.channels(),
            b.length()
        )));
    }
    Ok(())
}

/// Test accuracy of a recurrent classifier separating real (label 1) from
/// synthetic (label 0) windows. Values near 0.5 mean indistinguishable.
pub fn discriminative_score(
    real: &WindowSet,
    synth: &WindowSet,
    cfg: &EvaluatorConfig,
    seed: u64,
) -> Result<(f64, SplitSizes)> {
    same_shape(real, synth)?;
    if real.len() < MIN_PER_CLASS || synth.len() < MIN_PER_CLASS {
        return Err(Error::validation(format!(
            "discriminative score needs at least {MIN_PER_CLASS} windows per class, got {} real and {} synthetic",
            real.len(),
            synth.len()
        )));
    }
    let mut pool: Vec<(&Array<f64>, f64)> = real
        .windows
        .iter()
        .map(|w| (w, 1.0))
        .chain(synth.windows.iter().map(|w| (w, 0.0)))
        .collect();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let split = SplitSizes::of(pool.len());
    let (train, rest) = pool.split_at(split.train);
    let (val, test) = rest.split_at(split.val);
    let (tw, tl): (Vec<&Array<f64>>, Vec<f64>) = train.iter().copied().unzip();
    let (vw, vl): (Vec<&Array<f64>>, Vec<f64>) = val.iter().copied().unzip();
    let (sw, sl): (Vec<&Array<f64>>, Vec<f64>) = test.iter().copied().unzip();
    let val = if vw.is_empty() {
        None
    } else {
        Some((vw.as_slice(), vl.as_slice()))
    };
    let model = Lstm::fit(&tw, &tl, Objective::Classify, cfg, seed, val)?;
    Ok((model.score(&sw, &sl)?, split))
}

/// Train-on-synthetic, test-on-real RMSE of a recurrent regressor predicting
/// the condition from a window.
pub fn predictive_score(
    synth_train: &WindowSet,
    real_test: &WindowSet,
    cfg: &EvaluatorConfig,
    seed: u64,
) -> Result<f64> {
    same_shape(real_test, synth_train)?;
    for set in [synth_train, real_test] {
        if set.conditions.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation(
                "predictive score needs a finite condition on every window",
            ));
        }
    }
    let tw: Vec<&Array<f64>> = synth_train.windows.iter().collect();
    let model = Lstm::fit(
        &tw,
        &synth_train.conditions,
        Objective::Regress,
        cfg,
        seed,
        None,
    )?;
    let rw: Vec<&Array<f64>> = real_test.windows.iter().collect();
    Ok(rmse(&model.predict(&rw)?, &real_test.conditions))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub evaluator: EvaluatorConfig,
    /// One evaluator training per seed; scores are averaged.
    pub seeds: Vec<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            evaluator: EvaluatorConfig::default(),
            seeds: (0..5).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedScores {
    pub seed: u64,
    pub discriminative: f64,
    pub predictive: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub discriminative_score: f64,
    pub predictive_score: f64,
    pub dtw_mean: f64,
    pub frechet_mean: f64,
    pub per_seed: Vec<SeedScores>,
    pub splits: SplitSizes,
    pub real_count: usize,
    pub synth_count: usize,
}

impl EvalReport {
    pub fn is_finite(&self) -> bool {
        [
            self.discriminative_score,
            self.predictive_score,
            self.dtw_mean,
            self.frechet_mean,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Full protocol: scored metrics repeated per seed, distances once.
pub fn evaluate(real: &WindowSet, synth: &WindowSet, cfg: &EvalConfig) -> Result<EvalReport> {
    same_shape(real, synth)?;
    if cfg.seeds.is_empty() {
        return Err(Error::config("evaluation needs at least one seed"));
    }
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut splits = SplitSizes::of(0);
    for &seed in &cfg.seeds {
        let (disc, split) = discriminative_score(real, synth, &cfg.evaluator, seed)?;
        let pred = predictive_score(synth, real, &cfg.evaluator, seed)?;
        splits = split;
        per_seed.push(SeedScores {
            seed,
            discriminative: disc,
            predictive: pred,
        });
    }
    let n = per_seed.len() as f64;
    let dist = distance_report(real, synth)?;
    Ok(EvalReport {
        discriminative_score: per_seed.iter().map(|s| s.discriminative).sum::<f64>() / n,
        predictive_score: per_seed.iter().map(|s| s.predictive).sum::<f64>() / n,
        dtw_mean: dist.dtw_mean,
        frechet_mean: dist.frechet_mean,
        per_seed,
        splits,
        real_count: real.len(),
        synth_count: synth.len(),
    })
}

/// Two-component projection of the pooled sets as
/// `sample_id,source,pc1,pc2` rows; ids restart per source.
pub fn pca_csv(real: &WindowSet, synth: &WindowSet) -> Result<String> {
    same_shape(real, synth)?;
    let pooled: Vec<Array<f64>> = real.windows.iter().chain(&synth.windows).cloned().collect();
    let proj = pca_project(&pooled, 2)?;
    let mut out = String::from("sample_id,source,pc1,pc2\n");
    for (i, c) in proj.coords.iter().enumerate() {
        let (source, id) = if i < real.len() {
            ("real", i)
        } else {
            ("synth", i - real.len())
        };
        writeln!(out, "{id},{source},{:?},{:?}", c[0], c[1]).unwrap();
    }
    Ok(out)
}
