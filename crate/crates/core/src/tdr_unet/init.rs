use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::losses::OMEGA_LOGIT_INIT;
use crate::numcore::{Array, ParamSet, Real};

/// Name of the scalar ω logit stored alongside the network weights.
pub const OMEGA_LOGIT: &str = "omega_logit";

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// `U(-1/√fan_in, 1/√fan_in)`.
    FanIn(usize),
    Zeros,
    Ones,
    Const(f64),
}

#[derive(Default)]
struct Plan(Vec<(String, Vec<usize>, Init)>);

impl Plan {
    fn push(&mut self, name: String, shape: Vec<usize>, init: Init) {
        self.0.push((name, shape, init));
    }

    fn conv(&mut self, name: &str, cout: usize, cin: usize, k: usize) {
        self.push(
            format!("{name}.w"),
            vec![cout, cin, k],
            Init::FanIn(cin * k),
        );
        self.push(format!("{name}.b"), vec![cout], Init::FanIn(cin * k));
    }

    fn zero_conv(&mut self, name: &str, cout: usize, cin: usize, k: usize) {
        self.push(format!("{name}.w"), vec![cout, cin, k], Init::Zeros);
        self.push(format!("{name}.b"), vec![cout], Init::Zeros);
    }

    fn linear(&mut self, name: &str, din: usize, dout: usize) {
        self.push(format!("{name}.w"), vec![din, dout], Init::FanIn(din));
        self.push(format!("{name}.b"), vec![dout], Init::FanIn(din));
    }

    fn norm(&mut self, name: &str, c: usize) {
        self.push(format!("{name}.gamma"), vec![c], Init::Ones);
        self.push(format!("{name}.beta"), vec![c], Init::Zeros);
    }

    fn block(&mut self, name: &str, cin: usize, cout: usize, emb: usize, projection: bool) {
        self.conv(&format!("{name}.conv1"), cout, cin, 3);
        self.linear(&format!("{name}.emb"), emb, cout);
        self.norm(&format!("{name}.norm1"), cout);
        self.conv(&format!("{name}.conv2"), cout, cout, 3);
        self.norm(&format!("{name}.norm2"), cout);
        if projection {
            self.conv(&format!("{name}.res"), cout, cin, 1);
        }
    }
}

/// Every parameter's name, shape and initialiser, in a fixed order.
pub fn param_plan(cfg: &ModelConfig) -> Result<Vec<(String, Vec<usize>, Init)>> {
    cfg.validate()?;
    let mut p = Plan::default();
    let emb = cfg.time_embed_dim;
    let base = cfg.base_filters;
    p.conv("embed.input", base, cfg.in_channels, cfg.input_kernel);
    p.linear("time.fc1", emb, emb);
    p.linear("time.fc2", emb, emb);
    p.linear("cond.fc1", 1, cfg.cond_embed_dim);
    p.linear("cond.fc2", cfg.cond_embed_dim, cfg.cond_embed_dim);

    let levels = cfg.levels();
    let mut cin = base;
    for l in 0..levels {
        let cout = cfg.level_channels(l);
        p.block(&format!("enc.{l}"), cin, cout, emb, cin != cout);
        if l + 1 < levels {
            p.conv(&format!("enc.{l}.down"), cout, cout, 4);
        }
        cin = cout;
    }

    let mid = cfg.bottleneck_channels();
    if cfg.use_decomposition {
        p.conv("mid.decomp", mid, 2 * mid, 1);
    }
    if cfg.use_attention {
        p.conv("mid.qkv", 3 * cfg.attn_dim, mid, 1);
        p.conv("mid.proj", mid, cfg.attn_dim, 1);
    }

    let mut ch = mid;
    for l in (0..levels).rev() {
        let cat = ch + cfg.level_channels(l);
        let cout = cfg.decoder_channels(l);
        p.block(&format!("dec.{l}"), cat, cout, emb, true);
        ch = cout;
    }
    if cfg.post_decoder_decomposition {
        p.conv("post.decomp", ch, 2 * ch, 1);
    }
    p.zero_conv("head", cfg.in_channels, ch, 1);
    p.push(OMEGA_LOGIT.into(), vec![], Init::Const(OMEGA_LOGIT_INIT));
    Ok(p.0)
}

/// Draws a parameter set from `seed`. Values are generated in `f64` and
/// rounded once, so `f32` and `f64` sets agree up to that rounding.
pub fn init_params<F: Real>(cfg: &ModelConfig, seed: u64) -> Result<ParamSet<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = ParamSet::new();
    for (name, shape, init) in param_plan(cfg)? {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = match init {
            Init::FanIn(fan) => {
                let bound = 1.0 / (fan as f64).sqrt();
                (0..n).map(|_| rng.random_range(-bound..bound)).collect()
            }
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Const(v) => vec![v; n],
        };
        set.insert(name, Array::from_f64(shape, &data)?);
    }
    Ok(set)
}

/// Checks that `params` holds exactly the planned names and shapes.
pub fn check_params<F: Real>(cfg: &ModelConfig, params: &ParamSet<F>) -> Result<()> {
    let plan = param_plan(cfg)?;
    for (name, shape, _) in &plan {
        let a = params.get(name)?;
        if a.shape() != shape.as_slice() {
            return Err(Error::shape(format!(
                "parameter `{name}` has shape {:?}, config expects {shape:?}",
                a.shape()
            )));
        }
    }
    if params.len() != plan.len() {
        let extra: Vec<&String> = params
            .names()
            .filter(|n| !plan.iter().any(|(p, _, _)| p == *n))
            .collect();
        return Err(Error::config(format!("unexpected parameters {extra:?}")));
    }
    Ok(())
}

/// Scalar count of trainable values implied by `cfg`.
pub fn param_count(cfg: &ModelConfig) -> Result<usize> {
    Ok(param_plan(cfg)?
        .iter()
        .map(|(_, s, _)| s.iter().product::<usize>())
        .sum())
}
