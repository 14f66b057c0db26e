use rand::seq::index::sample as sample_indices;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numcore::{Array, Padding, ParamVars, PoolKind, Real, Var};

const NORM_EPS: f64 = 1e-5;

/// Whether the condition mask is applied. Training draws the mask from the
/// given generator; evaluation is deterministic.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut ChaCha8Rng),
    /// Evaluation with the condition embedding zeroed, so only the timestep
    /// embedding reaches the blocks.
    Unconditional,
}

fn conv<'g, F: Real>(
    p: &ParamVars<'g, F>,
    name: &str,
    x: Var<'g, F>,
    stride: usize,
) -> Result<Var<'g, F>> {
    let w = p.get(&format!("{name}.w"))?;
    let b = p.get(&format!("{name}.b"))?;
    x.conv1d(w, Some(b), stride, Padding::Same)
}

fn linear<'g, F: Real>(p: &ParamVars<'g, F>, name: &str, x: Var<'g, F>) -> Result<Var<'g, F>> {
    x.matmul(p.get(&format!("{name}.w"))?)?
        .add_row_bias(p.get(&format!("{name}.b"))?)
}

fn norm<'g, F: Real>(
    cfg: &ModelConfig,
    p: &ParamVars<'g, F>,
    name: &str,
    x: Var<'g, F>,
) -> Result<Var<'g, F>> {
    let groups = cfg.groups_for(x.shape()[1]);
    x.group_norm(
        groups,
        p.get(&format!("{name}.gamma"))?,
        p.get(&format!("{name}.beta"))?,
        F::lit(NORM_EPS),
    )
}

/// Two conv-norm-SiLU layers with the embedding added as a per-channel bias
/// after the first conv, plus a residual (projected when `projection`).
fn block<'g, F: Real>(
    cfg: &ModelConfig,
    p: &ParamVars<'g, F>,
    name: &str,
    x: Var<'g, F>,
    emb: Var<'g, F>,
    projection: bool,
) -> Result<Var<'g, F>> {
    let bias = linear(p, &format!("{name}.emb"), emb)?;
    let h = conv(p, &format!("{name}.conv1"), x, 1)?.add_channel_bias(bias)?;
    let h = norm(cfg, p, &format!("{name}.norm1"), h)?.silu();
    let h = conv(p, &format!("{name}.conv2"), h, 1)?;
    let h = norm(cfg, p, &format!("{name}.norm2"), h)?.silu();
    let res = if projection {
        conv(p, &format!("{name}.res"), x, 1)?
    } else {
        x
    };
    h.add(res)
}

/// `[sin(t·f_0..), cos(t·f_0..)]` with `f_i = 10000^(-i/(dim/2))`.
pub fn sinusoidal_encoding(t: f64, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10000f64.ln()) * i as f64 / half as f64).exp();
        out[i] = (t * freq).sin();
        out[half + i] = (t * freq).cos();
    }
    out
}

/// Input embedding: conv with the configured kernel to `base_filters`.
pub fn embed_noisy<'g, F: Real>(
    cfg: &ModelConfig,
    p: &ParamVars<'g, F>,
    x: Var<'g, F>,
) -> Result<Var<'g, F>> {
    let shape = x.shape();
    if shape.len() != 3 || shape[1] != cfg.in_channels {
        return Err(Error::shape(format!(
            "noisy input must be [B, {}, L], got {shape:?}",
            cfg.in_channels
        )));
    }
    conv(p, "embed.input", x, 1)
}

/// Timestep embedding `[B, time_embed_dim]`: sinusoid, FC, GeLU, FC.
pub fn embed_timestep<'g, F: Real>(
    cfg: &ModelConfig,
    p: &ParamVars<'g, F>,
    ts: &[usize],
) -> Result<Var<'g, F>> {
    if ts.contains(&0) {
        return Err(Error::Index("timesteps start at 1".into()));
    }
    let dim = cfg.time_embed_dim;
    let data: Vec<f64> = ts
        .iter()
        .flat_map(|&t| sinusoidal_encoding(t as f64, dim))
        .collect();
    let enc = p
        .graph()
        .constant(Array::from_f64(vec![ts.len(), dim], &data)?);
    let h = linear(p, "time.fc1", enc)?.gelu();
    linear(p, "time.fc2", h)
}

/// Condition embedding `[B, cond_embed_dim]`: FC, GeLU, FC, then in
/// training a random `mask_alpha` fraction of each row replaced by N(0, 1).
pub fn embed_condition<'g, F: Real>(
    cfg: &ModelConfig,
    p: &ParamVars<'g, F>,
    conds: &[f64],
    mode: &mut Mode<'_>,
) -> Result<Var<'g, F>> {
    if let Some(c) = conds.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::validation(format!("condition {c} outside [0, 1]")));
    }
    let x = p
        .graph()
        .constant(Array::from_f64(vec![conds.len(), 1], conds)?);
    let h = linear(p, "cond.fc1", x)?.gelu();
    let h = linear(p, "cond.fc2", h)?;
    match mode {
        Mode::Eval => Ok(h),
        Mode::Unconditional => Ok(p.graph().constant(Array::zeros(h.shape()))),
        Mode::Train(rng) => {
            let dim = cfg.cond_embed_dim;
            let masked = (cfg.mask_alpha * dim as f64).round() as usize;
            if masked == 0 {
                return Ok(h);
            }
            let mut keep = vec![true; conds.len() * dim];
            let mut repl = vec![F::zero(); conds.len() * dim];
            for b in 0..conds.len() {
                for i in sample_indices(&mut **rng, dim, masked.min(dim)) {
                    keep[b * dim + i] = false;
                    let z: f64 = StandardNormal.sample(&mut **rng);
                    repl[b * dim + i] = F::lit(z);
                }
            }
            h.mask_replace(keep, &Array::new(vec![conds.len(), dim], repl)?)
        }
    }
}

/// One encoder level. Returns `(next-level input, skip)`; the last level
/// does not downsample.
pub fn encoder_forward<'g, F: Real>(
    cfg: &ModelConfig,
    p: &ParamVars<'g, F>,
    h: Var<'g, F>,
    emb: Var<'g, F>,
    level: usize,
) -> Result<(Var<'g, F>, Var<'g, F>)> {
    if level >= cfg.levels() {
        return Err(Error::Index(format!("encoder level {level} out of range")));
    }
    let cin = h.shape()[1];
    let cout = cfg.level_channels(level);
    let out = block(cfg, p, &format!("enc.{level}"), h, emb, cin != cout)?;
    if level + 1 == cfg.levels() {
        return Ok((out, out));
    }
    let len = out.shape()[2];
    if len % 2 != 0 {
        return Err(Error::shape(format!(
            "cannot halve odd length {len} at encoder level {level}"
        )));
    }
    let down = conv(p, &format!("enc.{level}.down"), out, 2)?;
    Ok((down, out))
}

/// Trend / peak split of a feature map and their fused projection.
pub struct DecompositionFeatures<'g, F: Real> {
    pub trend: Var<'g, F>,
    pub peak: Var<'g, F>,
    pub fused: Var<'g, F>,
}

/// Average- and max-pooling (kernel 3, stride 1, replicate padding),
/// concatenated over channels and projected by the `k = 1` conv `name`.
pub fn decompose<'g, F: Real>(
    p: &ParamVars<'g, F>,
    name: &str,
    x: Var<'g, F>,
) -> Result<DecompositionFeatures<'g, F>> {
    let trend = x.pool1d(PoolKind::Avg, 3, 1)?;
    let peak = x.pool1d(PoolKind::Max, 3, 1)?;
    let fused = conv(p, name, Var::concat(&[trend, peak], 1)?, 1)?;
    Ok(DecompositionFeatures { trend, peak, fused })
}

/// Intermediate values of the bottleneck attention.
pub struct AttentionTensors<'g, F: Real> {
    pub q: Var<'g, F>,
    pub k: Var<'g, F>,
    pub v: Var<'g, F>,
    /// `[B, L, L]`, softmax over the key axis.
    pub weights: Var<'g, F>,
    /// Projected output before the residual.
    pub out: Var<'g, F>,
}

/// Single-head attention over time with `k = 1` conv projections.
pub fn attention<'g, F: Real>(
    cfg: &ModelConfig,
    p: &ParamVars<'g, F>,
    x: Var<'g, F>,
) -> Result<AttentionTensors<'g, F>> {
    let d = cfg.attn_dim;
    let qkv = conv(p, "mid.qkv", x, 1)?;
    let q = qkv.slice(1, 0, d)?;
    let k = qkv.slice(1, d, d)?;
    let v = qkv.slice(1, 2 * d, d)?;
    let scores = q
        .transpose()?
        .bmm(k)?
        .scale(F::lit(1.0 / (d as f64).sqrt()));
    let weights = scores.softmax(2)?;
    let mixed = v.bmm(weights.transpose()?)?;
    let out = conv(p, "mid.proj", mixed, 1)?;
    Ok(AttentionTensors {
        q,
        k,
        v,
        weights,
        out,
    })
}

/// Attention output plus the residual input.
pub fn reconstruct_attention<'g, F: Real>(
    cfg: &ModelConfig,
    p: &ParamVars<'g, F>,
    x: Var<'g, F>,
) -> Result<Var<'g, F>> {
    attention(cfg, p, x)?.out.add(x)
}

/// One decoder level: upsample (except at the deepest level), concatenate
/// the skip, then a projected residual block.
pub fn decoder_forward<'g, F: Real>(
    cfg: &ModelConfig,
    p: &ParamVars<'g, F>,
    h: Var<'g, F>,
    skip: Var<'g, F>,
    emb: Var<'g, F>,
    level: usize,
) -> Result<Var<'g, F>> {
    if level >= cfg.levels() {
        return Err(Error::Index(format!("decoder level {level} out of range")));
    }
    let h = if level + 1 < cfg.levels() {
        h.upsample_nearest(2)?
    } else {
        h
    };
    let (hs, ss) = (h.shape(), skip.shape());
    if hs[2] != ss[2] || hs[0] != ss[0] {
        return Err(Error::shape(format!(
            "decoder level {level}: features {hs:?} do not match skip {ss:?}"
        )));
    }
    block(
        cfg,
        p,
        &format!("dec.{level}"),
        Var::concat(&[h, skip], 1)?,
        emb,
        true,
    )
}

/// Predicted noise for a batch `x_t` `[B, C, L]` at timesteps `ts` under
/// conditions `conds`.
pub fn denoise_forward<'g, F: Real>(
    cfg: &ModelConfig,
    p: &ParamVars<'g, F>,
    x_t: Var<'g, F>,
    ts: &[usize],
    conds: &[f64],
    mut mode: Mode<'_>,
) -> Result<Var<'g, F>> {
    let shape = x_t.shape();
    if shape.len() != 3 || shape[1] != cfg.in_channels || shape[2] != cfg.length {
        return Err(Error::shape(format!(
            "denoiser expects [B, {}, {}], got {shape:?}",
            cfg.in_channels, cfg.length
        )));
    }
    if ts.len() != shape[0] || conds.len() != shape[0] {
        return Err(Error::shape(format!(
            "batch of {} needs as many timesteps and conditions, got {} and {}",
            shape[0],
            ts.len(),
            conds.len()
        )));
    }
    let t_emb = embed_timestep(cfg, p, ts)?;
    let c_emb = embed_condition(cfg, p, conds, &mut mode)?;
    let emb = t_emb.add(c_emb)?;

    let mut h = embed_noisy(cfg, p, x_t)?;
    let mut skips = Vec::with_capacity(cfg.levels());
    for level in 0..cfg.levels() {
        let (next, skip) = encoder_forward(cfg, p, h, emb, level)?;
        skips.push(skip);
        h = next;
    }

    if cfg.use_decomposition {
        h = decompose(p, "mid.decomp", h)?.fused;
    }
    if cfg.use_attention {
        h = reconstruct_attention(cfg, p, h)?;
    }

    for level in (0..cfg.levels()).rev() {
        h = decoder_forward(cfg, p, h, skips[level], emb, level)?;
    }
    if cfg.post_decoder_decomposition {
        h = decompose(p, "post.decomp", h)?.fused.add(h)?;
    }
    conv(p, "head", h, 1)
}
