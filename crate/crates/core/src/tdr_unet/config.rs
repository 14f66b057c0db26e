use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and behaviour of the denoiser.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub length: usize,
    pub base_filters: usize,
    pub channel_multipliers: Vec<usize>,
    pub time_embed_dim: usize,
    pub cond_embed_dim: usize,
    /// Fraction of condition-embedding entries replaced by noise in training.
    pub mask_alpha: f64,
    /// Upper bound on GroupNorm groups; see [`ModelConfig::groups_for`].
    pub groups: usize,
    pub input_kernel: usize,
    /// Per-projection width of Q, K and V at the bottleneck.
    pub attn_dim: usize,
    pub use_decomposition: bool,
    pub use_attention: bool,
    /// Extra decomposition-reconstruction after the last decoder level.
    pub post_decoder_decomposition: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 14,
            length: 48,
            base_filters: 32,
            channel_multipliers: vec![1, 2, 2],
            time_embed_dim: 128,
            cond_embed_dim: 128,
            mask_alpha: 0.1,
            groups: 8,
            input_kernel: 7,
            attn_dim: 128,
            use_decomposition: true,
            use_attention: true,
            post_decoder_decomposition: false,
        }
    }
}

impl ModelConfig {
    pub fn levels(&self) -> usize {
        self.channel_multipliers.len()
    }

    /// Channels at encoder level `l`.
    pub fn level_channels(&self, l: usize) -> usize {
        self.base_filters * self.channel_multipliers[l]
    }

    pub fn bottleneck_channels(&self) -> usize {
        self.level_channels(self.levels() - 1)
    }

    /// Output channels of decoder level `l`: the previous encoder level's
    /// width, or the base width at level 0.
    pub fn decoder_channels(&self, l: usize) -> usize {
        if l == 0 {
            self.base_filters
        } else {
            self.level_channels(l - 1)
        }
    }

    /// Time length at encoder level `l` (one stride-2 downsample between
    /// consecutive levels).
    pub fn level_length(&self, l: usize) -> usize {
        self.length >> l
    }

    /// Largest group count `g <= groups` dividing `channels` with at least
    /// two channels per group, so a per-channel bias survives normalisation.
    pub fn groups_for(&self, channels: usize) -> usize {
        let mut g = self.groups.min(channels / 2).max(1);
        while g > 1 && !channels.is_multiple_of(g) {
            g -= 1;
        }
        g
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("in_channels", self.in_channels),
            ("length", self.length),
            ("base_filters", self.base_filters),
            ("time_embed_dim", self.time_embed_dim),
            ("cond_embed_dim", self.cond_embed_dim),
            ("groups", self.groups),
            ("attn_dim", self.attn_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.channel_multipliers.is_empty() || self.channel_multipliers.contains(&0) {
            return Err(Error::config(
                "channel_multipliers must be non-empty and positive",
            ));
        }
        if self.time_embed_dim != self.cond_embed_dim {
            return Err(Error::config(format!(
                "time_embed_dim ({}) and cond_embed_dim ({}) must match; the two embeddings are summed",
                self.time_embed_dim, self.cond_embed_dim
            )));
        }
        if !self.time_embed_dim.is_multiple_of(2) {
            return Err(Error::config(
                "time_embed_dim must be even (sin and cos halves)",
            ));
        }
        if self.input_kernel.is_multiple_of(2) {
            return Err(Error::config("input_kernel must be odd"));
        }
        if !(0.0..=1.0).contains(&self.mask_alpha) {
            return Err(Error::config(format!(
                "mask_alpha {} outside [0, 1]",
                self.mask_alpha
            )));
        }
        let factor = 1usize << (self.levels() - 1);
        if !self.length.is_multiple_of(factor) {
            return Err(Error::config(format!(
                "length {} must be divisible by {factor} for {} levels",
                self.length,
                self.levels()
            )));
        }
        Ok(())
    }
}
