//! Conditional denoising-diffusion engine for industrial multivariate time
//! series: an autodiff array core, noise schedules, the temporal
//! decomposition-reconstruction UNet denoiser, the MMD-regularised training
//! objective, ancestral sampling, data preparation, and evaluation metrics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod numcore;
pub mod sample;
pub mod schedule;
pub mod tdr_unet;
pub mod train;

pub use error::{Error, Result};
