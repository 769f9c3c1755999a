//! Teacher-forced negative-log-likelihood training with Adam, global-norm
//! gradient clipping and validation-loss early stopping.

mod adam;
mod loss;
mod run;

pub use adam::{adam_step, AdamState};
pub use loss::{evaluate_loss, nll_loss, teacher_forced_loss};
pub use run::{EpochMetrics, StopReason, TrainReport, Trainer};

use serde::{Deserialize, Serialize};

/// Optimization hyperparameters. Only the learning rate is load-bearing for
/// reproduction; the rest are the widely adopted defaults and are recorded
/// in every run directory and checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    pub max_epochs: usize,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Padded source tokens per batch.
    pub batch_token_budget: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 5.0,
            max_epochs: 10,
            patience: 3,
            seed: 0,
            batch_token_budget: 2000,
        }
    }
}
