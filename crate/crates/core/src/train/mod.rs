//! Optimizer, objectives and the three training regimes.

mod adam;
mod config;
mod objective;
mod trainer;

pub use adam::Adam;
pub use config::{Regime, TrainConfig};
pub use objective::{batch_loss, batch_loss_and_grad, BatchEval, GradTarget, LossWeights};
pub use trainer::{EpochMetrics, Phase, Trainer};
