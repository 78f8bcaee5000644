use serde::{Deserialize, Serialize};

use crate::error::{CefError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Main phase fits `h` by maximum likelihood with `g` frozen.
    Sequential,
    /// Main phase optimizes `β·NLL + α·reconstruction` over `g` and `h`.
    #[default]
    Joint,
}

/// Phase schedule and optimizer settings. Defaults are the sphere experiment's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub warmup_epochs: usize,
    pub main_epochs: usize,
    /// Likelihood epochs with `g` fixed after the main phase.
    pub finetune_epochs: usize,
    pub alpha: f64,
    pub beta_ll: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub regime: Regime,
    /// Global gradient-norm clip; `0` disables.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            warmup_epochs: 100,
            main_epochs: 100,
            finetune_epochs: 100,
            alpha: 100.0,
            beta_ll: 0.001,
            learning_rate: 1e-3,
            batch_size: 100,
            seed: 0,
            regime: Regime::Joint,
            grad_clip: 100.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CefError::Config(m.to_string()));
        if !(self.alpha >= 0.0) || !(self.beta_ll >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.grad_clip >= 0.0) {
            return bad("gradient clip must be non-negative");
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.warmup_epochs + self.main_epochs + self.finetune_epochs
    }
}
