//! Negative-ELBO training of a [`VBLinearLayer`](crate::vbll::VBLinearLayer).

mod adam;
mod gradcheck;
mod loss;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_step, Adam, AdamConfig, AdamMoments};
pub use gradcheck::{gradcheck, gradcheck_by_block};
pub use loss::{
    elbo_gradients, elbo_gradients_with, elbo_loss, elbo_loss_with, kl_gradients, LayerGradients,
    LossBreakdown,
};
pub use trainer::{train, train_from, EpochRecord, TrainingTrace};

/// How the KL term is weighted against the minibatch NLL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlScaleMode {
    /// `total = mean NLL + KL / N_train`.
    #[default]
    PerDataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub kl_scale_mode: KlScaleMode,
    /// Flipout passes averaged per minibatch.
    pub train_mc_samples: usize,
    pub seed: u64,
    /// Epochs without validation-NLL improvement before stopping.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 128,
            learning_rate: 1e-2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            kl_scale_mode: KlScaleMode::PerDataset,
            train_mc_samples: 1,
            seed: 0,
            early_stop_patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Err(Error::invalid("train config", reason));
        if self.epochs < 1 {
            return fail("epochs must be at least 1");
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return fail("adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon >= 0.0 && self.adam_epsilon.is_finite()) {
            return fail("adam_epsilon must be nonnegative");
        }
        if self.train_mc_samples < 1 {
            return fail("train_mc_samples must be at least 1");
        }
        if self.early_stop_patience == Some(0) {
            return fail("early_stop_patience must be at least 1 when set");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}
