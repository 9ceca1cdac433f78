//! Training and model hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What feeds the first trunk layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputFeatures {
    /// Concatenated random Fourier features over all configured scales.
    #[default]
    Fourier,
    /// The raw time-index, mapped by the first trunk layer (`c -> d`).
    Linear,
}

/// How the last layer is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Closed-form ridge regression on the lookback window.
    #[default]
    Ridge,
    /// A single linear layer trained by gradient descent.
    Linear,
}

/// How dropout masks are drawn across the windows of a training batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSharing {
    /// Independent masks for every window.
    #[default]
    PerWindow,
    /// One set of masks for all windows sharing a time-index; much cheaper.
    PerBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lambda_lr: f64,
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub max_grad_norm: f64,
    pub layers: usize,
    pub layer_size: usize,
    pub scales: Vec<f64>,
    pub ff_size: usize,
    pub dropout: f64,
    pub lambda_init: f64,
    /// Lookback length as a multiple of the horizon (`L = mu * H`).
    pub lookback_multiplier: usize,
    pub horizon: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub input_features: InputFeatures,
    pub head: HeadKind,
    pub dropout_masks: MaskSharing,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 1e-3,
            lambda_lr: 1.0,
            warmup_epochs: 5,
            batch_size: 256,
            patience: 7,
            max_grad_norm: 10.0,
            layers: 5,
            layer_size: 256,
            scales: vec![0.01, 0.1, 1.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            ff_size: 4096,
            dropout: 0.1,
            lambda_init: 0.0,
            lookback_multiplier: 1,
            horizon: 96,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            input_features: InputFeatures::Fourier,
            head: HeadKind::Ridge,
            dropout_masks: MaskSharing::PerWindow,
        }
    }
}

impl TrainConfig {
    pub fn lookback(&self) -> usize {
        self.lookback_multiplier * self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.warmup_epochs >= self.epochs {
            return bad(format!(
                "warmup_epochs ({}) must be smaller than epochs ({})",
                self.warmup_epochs, self.epochs
            ));
        }
        if self.batch_size == 0 || self.layers == 0 || self.layer_size == 0 {
            return bad("batch_size, layers and layer_size must be >= 1".into());
        }
        if !(self.lr > 0.0) || !(self.lambda_lr > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("learning rates and max_grad_norm must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !self.lambda_init.is_finite() {
            return bad("lambda_init must be finite".into());
        }
        if self.horizon == 0 || self.lookback_multiplier == 0 {
            return bad("horizon and lookback_multiplier must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if self.input_features == InputFeatures::Fourier {
            if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                return bad("scales must be a non-empty list of positive numbers".into());
            }
            let per = 2 * self.scales.len();
            if self.ff_size == 0 || self.ff_size % per != 0 {
                return bad(format!(
                    "ff_size ({}) must be a positive multiple of 2 x number of scales ({per})",
                    self.ff_size
                ));
            }
        }
        Ok(())
    }
}
