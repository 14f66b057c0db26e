//! The denoiser ε_θ(x_t, t | x_c): a 1-D UNet whose bottleneck splits
//! features into trend and peak parts and recombines them with
//! convolutional attention over time.

mod config;
mod forward;
mod init;

pub use config::ModelConfig;
pub use forward::{
    attention, decoder_forward, decompose, denoise_forward, embed_condition, embed_noisy,
    embed_timestep, encoder_forward, reconstruct_attention, sinusoidal_encoding, AttentionTensors,
    DecompositionFeatures, Mode,
};
pub use init::{check_params, init_params, param_count, param_plan, Init, OMEGA_LOGIT};
