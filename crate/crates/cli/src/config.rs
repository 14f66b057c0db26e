//! The run configuration document.

use std::path::{Path, PathBuf};

use diffmts_core::data::RUL_CAP;
use diffmts_core::eval::EvalConfig;
use diffmts_core::losses::{KernelSpec, OMEGA_LOGIT_INIT};
use diffmts_core::tdr_unet::ModelConfig;
use diffmts_core::train::{OmegaMode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// `.csv` files are read as raw CSV, anything else as C-MAPSS text.
    #[default]
    Auto,
    Cmapss,
    Raw,
}

impl DataFormat {
    pub fn resolve(self, path: &Path) -> DataFormat {
        match self {
            DataFormat::Auto
                if path
                    .extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("csv")) =>
            {
                DataFormat::Raw
            }
            DataFormat::Auto => DataFormat::Cmapss,
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train_path: Option<PathBuf>,
    pub format: DataFormat,
    pub stride: usize,
    pub rul_cap: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_path: None,
            format: DataFormat::Auto,
            stride: 1,
            rul_cap: RUL_CAP,
        }
    }
}

/// Model variants compared in the ablation table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Full,
    /// ω frozen at its initial value.
    OmegaFixed,
    /// Noise loss only.
    MmdOff,
    /// A single RBF kernel with a fixed bandwidth instead of the adaptive
    /// mixture.
    KernelFixed,
    DecompositionOff,
    AttentionOff,
    /// Neither decomposition nor attention.
    PlainUnet,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::PlainUnet,
        Variant::DecompositionOff,
        Variant::AttentionOff,
        Variant::MmdOff,
        Variant::KernelFixed,
        Variant::OmegaFixed,
        Variant::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::OmegaFixed => "omega-fixed",
            Variant::MmdOff => "mmd-off",
            Variant::KernelFixed => "kernel-fixed",
            Variant::DecompositionOff => "decomposition-off",
            Variant::AttentionOff => "attention-off",
            Variant::PlainUnet => "plain-unet",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    /// Row label in the comparison table.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "Proposed",
            Variant::OmegaFixed => "Diff-MTS fixed ω",
            Variant::MmdOff => "Diff-MTS w/o Ada-MMD",
            Variant::KernelFixed => "Diff-MTS w/o Ada",
            Variant::DecompositionOff => "TR-UNet",
            Variant::AttentionOff => "TD-UNet",
            Variant::PlainUnet => "Original UNet",
        }
    }

    pub fn apply(self, model: &mut ModelConfig, train: &mut TrainConfig) {
        match self {
            Variant::Full => {}
            Variant::OmegaFixed => {
                train.omega = OmegaMode::Fixed(1.0 / (1.0 + (-OMEGA_LOGIT_INIT).exp()));
            }
            Variant::MmdOff => train.omega = OmegaMode::Fixed(0.0),
            Variant::KernelFixed => train.kernel = KernelSpec::single(1.0),
            Variant::DecompositionOff => model.use_decomposition = false,
            Variant::AttentionOff => model.use_attention = false,
            Variant::PlainUnet => {
                model.use_decomposition = false;
                model.use_attention = false;
            }
        }
    }
}

/// One JSON document holding every setting of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub variant: Variant,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            variant: Variant::Full,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| io_err(path, e))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Model and training settings with the variant applied.
    pub fn effective(&self) -> (ModelConfig, TrainConfig) {
        let (mut m, mut t) = (self.model.clone(), self.train.clone());
        self.variant.apply(&mut m, &mut t);
        (m, t)
    }

    pub fn validate(&self) -> CliResult<()> {
        let (m, t) = self.effective();
        m.validate()?;
        t.validate()?;
        if self.data.stride == 0 {
            return Err(CliError::Validation(
                "data.stride must be at least 1".into(),
            ));
        }
        if !(self.data.rul_cap > 0.0) {
            return Err(CliError::Validation("data.rul_cap must be positive".into()));
        }
        Ok(())
    }
}
