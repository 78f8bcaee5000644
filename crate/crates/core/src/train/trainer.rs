use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::objective::{batch_loss_and_grad, BatchEval, GradTarget, LossWeights};
use super::{Adam, Regime, TrainConfig};
use crate::error::{CefError, Result};
use crate::flow::CefModel;
use crate::linalg::{norm_sq, Tensor};
use crate::par::ExecPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Sequential,
    Joint,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Warmup => "warmup",
            Phase::Sequential => "sequential",
            Phase::Joint => "joint",
        })
    }
}

/// One epoch's batch-averaged loss terms.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub phase: Phase,
    pub nll: f64,
    pub recon: f64,
    pub total: f64,
    pub wall_ms: u128,
}

impl EpochMetrics {
    /// `key=value` line without the wall-clock field, stable across runs.
    pub fn deterministic_line(&self) -> String {
        format!(
            "epoch={} phase={} nll={:.17e} recon={:.17e} total={:.17e}",
            self.epoch, self.phase, self.nll, self.recon, self.total
        )
    }

    pub fn line(&self) -> String {
        format!("{} wall_ms={}", self.deterministic_line(), self.wall_ms)
    }
}

/// Drives the warmup / main / fine-tune schedule. Optimizer state for `g` and
/// `h` is kept separately so frozen groups keep their moments untouched.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub policy: ExecPolicy,
    pub adam_g: Adam,
    pub adam_h: Adam,
    pub epoch: usize,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(config: TrainConfig, model: &CefModel) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            adam_g: Adam::new(model.g_params().len(), config.learning_rate),
            adam_h: Adam::new(model.h_params().len(), config.learning_rate),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            policy: ExecPolicy::default(),
            epoch: 0,
            config,
        })
    }

    pub fn with_policy(mut self, policy: ExecPolicy) -> Self {
        self.policy = policy;
        self
    }

    fn batches(&mut self, rows: usize) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..rows).collect();
        order.shuffle(&mut self.rng);
        order.chunks(self.config.batch_size).map(<[usize]>::to_vec).collect()
    }

    fn ensure_actnorm(&self, model: &mut CefModel, data: &Tensor) -> Result<()> {
        if model.has_uninitialized_actnorm() {
            let n = data.rows().min(self.config.batch_size);
            let first: Vec<Vec<f64>> = (0..n).map(|i| data.row(i).to_vec()).collect();
            model.initialize_actnorm(&first)?;
        }
        Ok(())
    }

    fn clip(&self, grads: &mut [&mut Vec<f64>]) {
        let limit = self.config.grad_clip;
        if limit <= 0.0 {
            return;
        }
        let norm = grads.iter().map(|g| norm_sq(g)).sum::<f64>().sqrt();
        if norm > limit {
            let s = limit / norm;
            for g in grads.iter_mut() {
                g.iter_mut().for_each(|v| *v *= s);
            }
        }
    }

    fn run_epoch(&mut self, model: &mut CefModel, data: &Tensor, phase: Phase) -> Result<EpochMetrics> {
        if data.is_empty() || data.rows() == 0 {
            return Err(CefError::Config("training data is empty".into()));
        }
        let start = Instant::now();
        let (weights, target) = match phase {
            Phase::Warmup => (LossWeights { alpha: 1.0, beta_ll: 0.0 }, GradTarget::Embedding),
            Phase::Sequential => (LossWeights { alpha: 0.0, beta_ll: 1.0 }, GradTarget::Stump),
            Phase::Joint => (
                LossWeights { alpha: self.config.alpha, beta_ll: self.config.beta_ll },
                GradTarget::Both,
            ),
        };
        if phase != Phase::Warmup {
            self.ensure_actnorm(model, data)?;
        }
        let mut sums = (0.0, 0.0, 0.0);
        let batches = self.batches(data.rows());
        for idx in &batches {
            let BatchEval { nll, recon, total, mut grad_g, mut grad_h } =
                batch_loss_and_grad(model, data, Some(idx), weights, target, self.policy).map_err(|e| {
                    CefError::Numeric(format!("{phase} epoch {}: {e}", self.epoch))
                })?;
            if !total.is_finite() {
                return Err(CefError::Numeric(format!("{phase} epoch {}: loss is {total}", self.epoch)));
            }
            sums.0 += nll;
            sums.1 += recon;
            sums.2 += total;
            self.clip(&mut [&mut grad_g, &mut grad_h]);
            if !grad_g.is_empty() {
                let mut p = model.g_params();
                self.adam_g.step(&mut p, &grad_g)?;
                model.set_g_params(&p)?;
            }
            if !grad_h.is_empty() {
                let mut p = model.h_params();
                self.adam_h.step(&mut p, &grad_h)?;
                model.set_h_params(&p)?;
            }
        }
        let nb = batches.len() as f64;
        let metrics = EpochMetrics {
            epoch: self.epoch,
            phase,
            nll: sums.0 / nb,
            recon: sums.1 / nb,
            total: sums.2 / nb,
            wall_ms: start.elapsed().as_millis(),
        };
        self.epoch += 1;
        Ok(metrics)
    }

    /// Reconstruction-only epoch; updates `g` only.
    pub fn warmup_epoch(&mut self, model: &mut CefModel, data: &Tensor) -> Result<EpochMetrics> {
        self.run_epoch(model, data, Phase::Warmup)
    }

    /// Maximum likelihood on the projected data; updates `h` only.
    pub fn sequential_epoch(&mut self, model: &mut CefModel, data: &Tensor) -> Result<EpochMetrics> {
        self.run_epoch(model, data, Phase::Sequential)
    }

    /// Mixed objective `β·NLL + α·reconstruction`; updates `g` and `h`.
    pub fn joint_epoch(&mut self, model: &mut CefModel, data: &Tensor) -> Result<EpochMetrics> {
        self.run_epoch(model, data, Phase::Joint)
    }

    /// Runs the configured schedule, calling `on_epoch` after every epoch.
    pub fn fit<F: FnMut(&EpochMetrics)>(
        &mut self,
        model: &mut CefModel,
        data: &Tensor,
        mut on_epoch: F,
    ) -> Result<Vec<EpochMetrics>> {
        let main = match self.config.regime {
            Regime::Sequential => Phase::Sequential,
            Regime::Joint => Phase::Joint,
        };
        let schedule = std::iter::repeat_n(Phase::Warmup, self.config.warmup_epochs)
            .chain(std::iter::repeat_n(main, self.config.main_epochs))
            .chain(std::iter::repeat_n(Phase::Sequential, self.config.finetune_epochs));
        let mut out = Vec::with_capacity(self.config.total_epochs());
        for phase in schedule {
            let m = self.run_epoch(model, data, phase)?;
            on_epoch(&m);
            out.push(m);
        }
        if data.rows() > 0 {
            self.ensure_actnorm(model, data)?;
        }
        Ok(out)
    }
}
