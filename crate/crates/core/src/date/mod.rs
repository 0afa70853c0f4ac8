//! Adversarial time-to-event model.
//!
//! A conditional generator maps covariates, the censoring flag and injected
//! noise to a positive time (its head emits log-time). A discriminator scores
//! `(x, t)` pairs. The generator is trained against the discriminator on
//! observed events, with a hinge penalty that keeps draws for censored
//! records past their censoring time and an L1 distortion term on events.

mod losses;
mod network;
mod train;

use serde::{Deserialize, Serialize};

pub use losses::{adversarial_losses, censored_hinge, distortion, GeneratorObjective};
pub use network::{DateModel, NoiseDraw};
pub use train::{train, DateEpochLog};

use crate::error::{Error, Result};
use crate::training::TrainingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// Uniform on (0, 1).
    #[default]
    Uniform01,
    /// Uniform on (-1, 1).
    UniformSym,
    StdNormal,
}

/// Which affine maps of the generator receive a noise term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePlacement {
    /// Every hidden layer and the output head.
    #[default]
    AllLayers,
    /// The first affine map only, equivalent to appending noise to the input.
    InputOnly,
    /// The output head only.
    OutputOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanLoss {
    /// Binary cross-entropy with the non-saturating generator objective.
    #[default]
    Log,
    /// Expected discriminator output without the logarithm.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DateConfig {
    /// Hidden widths of both networks.
    pub hidden: Vec<usize>,
    pub noise_distribution: NoiseDistribution,
    pub noise_placement: NoisePlacement,
    /// Noise width per noisy layer; defaults to that layer's output width.
    pub noise_dim: Option<usize>,
    pub lambda_censored: f64,
    pub lambda_distortion: f64,
    pub gan_loss: GanLoss,
    pub discriminator_steps: usize,
    pub generator_steps: usize,
    pub keep_prob: f64,
    pub batch_norm: bool,
    pub train: TrainingConfig,
}

impl Default for DateConfig {
    fn default() -> Self {
        Self {
            hidden: vec![50, 50],
            noise_distribution: NoiseDistribution::Uniform01,
            noise_placement: NoisePlacement::AllLayers,
            noise_dim: None,
            lambda_censored: 1.0,
            lambda_distortion: 1.0,
            gan_loss: GanLoss::Log,
            discriminator_steps: 1,
            generator_steps: 1,
            keep_prob: 0.8,
            batch_norm: true,
            train: TrainingConfig::default(),
        }
    }
}

impl DateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::config(
                "model.hidden",
                "layer widths must be positive",
            ));
        }
        if self.noise_dim == Some(0) {
            return Err(Error::config("model.noise_dim", "must be positive"));
        }
        for (field, v) in [
            ("model.lambda_censored", self.lambda_censored),
            ("model.lambda_distortion", self.lambda_distortion),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be finite and nonnegative"));
            }
        }
        if self.discriminator_steps == 0 {
            return Err(Error::config(
                "model.discriminator_steps",
                "must be at least 1",
            ));
        }
        if self.generator_steps == 0 {
            return Err(Error::config("model.generator_steps", "must be at least 1"));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::config("model.keep_prob", "must lie in (0, 1]"));
        }
        self.train.validate()
    }
}
