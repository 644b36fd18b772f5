//! Few-shot prompt tuner: biased prompt generation, image-text consistency
//! losses, their exact gradients and the training loop.

pub mod backprop;
pub mod gradcheck;
pub mod ops;
pub mod optim;
pub mod params;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use backprop::{batch_loss, forward_backward, LossWeights, Sample};
pub use gradcheck::{gradcheck, GradcheckConfig, GradcheckReport};
pub use ops::{build_idbp, loss_bias, loss_id, loss_inter, loss_intra, meta_net, sample_bias};
pub use optim::{sgd_step, sgd_update};
pub use params::{ParamGroup, TunerDims, TunerParams};
pub use train::{dataset_loss, train, write_loss_history, Conditioning, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub context_length: usize,
    pub momentum: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.002,
            batch_size: 32,
            context_length: 16,
            momentum: 0.9,
            alpha: 0.005,
            beta: 0.1,
            tau: crate::scoring::DEFAULT_TAU,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadConfig(m.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.context_length == 0 {
            return bad("context_length must be at least 1");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0 && self.beta.is_finite() && self.beta >= 0.0) {
            return bad("alpha and beta must be non-negative");
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad("tau must be positive");
        }
        Ok(())
    }
}

/// Batch-mean values of the four losses and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_id: f64,
    pub l_inter: f64,
    pub l_intra: f64,
    pub l_bias: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `total = l_id + α (l_intra + l_inter) + β l_bias`.
    pub fn combine(l_id: f64, l_inter: f64, l_intra: f64, l_bias: f64, alpha: f64, beta: f64) -> Self {
        Self {
            l_id,
            l_inter,
            l_intra,
            l_bias,
            total: l_id + alpha * (l_intra + l_inter) + beta * l_bias,
        }
    }
}
