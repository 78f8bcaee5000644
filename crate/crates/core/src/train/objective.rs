//! Per-sample loss `β·(−log p(x)) + α·‖x − g(g†(x))‖²` and its exact gradient.
//!
//! Forward: `u = g†(x)` through the block left-inverses, `x̂ = g(u)` with the
//! conformal factors along the way, `z = h⁻¹(u)`. Backward runs the same
//! chain in reverse; `u` collects cotangents from both the reconstruction
//! branch and the stump before flowing back through the left-inverses.

use crate::bijective::BijectiveBlock;
use crate::conformal::ConformalBlock;
use crate::error::{CefError, Result};
use crate::flow::{standard_normal_log_density, CefModel};
use crate::linalg::{axpy, norm_sq, sub, Tensor};
use crate::par::{map_indexed, ExecPolicy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta_ll: f64,
}

/// Which parameter groups receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradTarget {
    Embedding,
    Stump,
    Both,
}

impl GradTarget {
    fn g(self) -> bool {
        matches!(self, Self::Embedding | Self::Both)
    }
    fn h(self) -> bool {
        matches!(self, Self::Stump | Self::Both)
    }
}

/// Batch means of the loss terms plus parameter gradients of `total`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEval {
    pub nll: f64,
    pub recon: f64,
    pub total: f64,
    /// Empty unless the embedding is a gradient target.
    pub grad_g: Vec<f64>,
    /// Empty unless the stump is a gradient target.
    pub grad_h: Vec<f64>,
}

struct SampleEval {
    nll: f64,
    recon: f64,
    raw_g: Vec<f64>,
    raw_h: Vec<f64>,
}

fn raw_offsets<I: Iterator<Item = usize>>(lens: I) -> Vec<usize> {
    let mut off = vec![0];
    for l in lens {
        off.push(off.last().unwrap() + l);
    }
    off
}

fn sample_eval(model: &CefModel, x: &[f64], w: LossWeights, target: GradTarget) -> Result<SampleEval> {
    let m = model.latent_dim() as f64;
    let g = &model.g;
    let h = &model.h;

    // left-inverse chain: xs[i] is the input of g_i†, xs[0] = x
    let mut inv_inputs = Vec::with_capacity(g.len());
    let mut cur = x.to_vec();
    for b in g.iter().rev() {
        let next = b.left_inverse(&cur)?;
        inv_inputs.push(std::mem::replace(&mut cur, next));
    }
    inv_inputs.reverse(); // inv_inputs[i] is the input of g[i].left_inverse
    let u = cur;

    let mut fwd_inputs = Vec::with_capacity(g.len());
    let mut log_lambda = 0.0;
    let mut cur = u.clone();
    for b in g {
        log_lambda += b.log_conformal_factor(&cur)?;
        let next = b.forward(&cur)?;
        fwd_inputs.push(std::mem::replace(&mut cur, next));
    }
    let xhat = cur;
    let resid = sub(x, &xhat);
    let recon = norm_sq(&resid);

    // The stump is skipped entirely when the likelihood plays no part, so
    // warmup works before ActNorm has seen data.
    let need_stump = w.beta_ll != 0.0 || target.h();
    let mut stump_inputs = Vec::with_capacity(h.len());
    let mut logdet_h = 0.0;
    let mut cur = u.clone();
    if need_stump {
        for b in h.iter().rev() {
            let (prev, ld) = b.inverse(&cur)?;
            logdet_h += ld;
            stump_inputs.push(std::mem::replace(&mut cur, prev));
        }
        stump_inputs.reverse(); // stump_inputs[j] is the input of h[j].inverse
    }
    let z = cur;
    let nll = if need_stump {
        -(standard_normal_log_density(&z) - logdet_h - m * log_lambda)
    } else {
        f64::NAN
    };
    if (need_stump && !nll.is_finite()) || !recon.is_finite() {
        return Err(CefError::Numeric(format!("non-finite loss (nll {nll}, recon {recon})")));
    }

    let g_off = raw_offsets(g.iter().map(|b| b.raw_grad_len()));
    let h_off = raw_offsets(h.iter().map(|b| b.raw_grad_len()));
    let mut raw_g = vec![0.0; if target.g() { *g_off.last().unwrap() } else { 0 }];
    let mut raw_h = vec![0.0; if target.h() { *h_off.last().unwrap() } else { 0 }];
    let mut scratch_h = vec![0.0; *h_off.last().unwrap()];

    let mut du = vec![0.0; u.len()];

    // stump: loss term β·(½‖z‖² + const + Σ log-dets)
    if w.beta_ll != 0.0 {
        let mut dz: Vec<f64> = z.iter().map(|v| w.beta_ll * v).collect();
        for (j, b) in h.iter().enumerate() {
            let buf = if target.h() { &mut raw_h[h_off[j]..h_off[j + 1]] } else { &mut scratch_h[h_off[j]..h_off[j + 1]] };
            dz = b.inverse_vjp(&stump_inputs[j], &dz, w.beta_ll, buf)?;
        }
        axpy(1.0, &dz, &mut du);
    }

    if target.g() {
        // reconstruction and conformal-factor terms, back through g(u)
        let mut dy: Vec<f64> = resid.iter().map(|r| -2.0 * w.alpha * r).collect();
        let dlog = w.beta_ll * m;
        for (i, b) in g.iter().enumerate().rev() {
            dy = b.vjp(&fwd_inputs[i], &dy, dlog, &mut raw_g[g_off[i]..g_off[i + 1]])?;
        }
        axpy(1.0, &dy, &mut du);

        // then back through u = g†(x)
        let mut dcur = du;
        for (i, b) in g.iter().enumerate() {
            dcur = b.left_inverse_vjp(&inv_inputs[i], &dcur, &mut raw_g[g_off[i]..g_off[i + 1]])?;
        }
    }

    Ok(SampleEval { nll, recon, raw_g, raw_h })
}

fn mean_raw<'a, I: Iterator<Item = &'a Vec<f64>>>(parts: I, n: f64) -> Vec<f64> {
    let parts: Vec<&Vec<f64>> = parts.collect();
    let len = parts.first().map_or(0, |p| p.len());
    let mut acc = vec![0.0; len];
    for p in parts {
        axpy(1.0, p, &mut acc);
    }
    acc.iter_mut().for_each(|v| *v /= n);
    acc
}

fn reduce_blocks<F: Fn(&[f64]) -> Vec<f64>>(raw: &[f64], blocks: impl Iterator<Item = (usize, F)>) -> Vec<f64> {
    let mut out = Vec::new();
    let mut off = 0;
    for (len, reduce) in blocks {
        out.extend(reduce(&raw[off..off + len]));
        off += len;
    }
    out
}

/// Mean loss over the batch rows `idx` (all rows when `None`) with gradients
/// for `target`. `nll` is NaN when neither the likelihood weight nor the
/// target involves the stump. Per-sample work runs under `policy`; the reduction is always
/// in row order.
pub fn batch_loss_and_grad(
    model: &CefModel,
    data: &Tensor,
    idx: Option<&[usize]>,
    weights: LossWeights,
    target: GradTarget,
    policy: ExecPolicy,
) -> Result<BatchEval> {
    let all: Vec<usize>;
    let idx = match idx {
        Some(i) => i,
        None => {
            all = (0..data.rows()).collect();
            &all
        }
    };
    if idx.is_empty() {
        return Err(CefError::Shape("empty batch".into()));
    }
    let evals = map_indexed(policy, idx.len(), |k| sample_eval(model, data.row(idx[k]), weights, target));
    let evals = evals.into_iter().collect::<Result<Vec<_>>>()?;
    let n = idx.len() as f64;
    let nll = evals.iter().map(|e| e.nll).sum::<f64>() / n;
    let recon = evals.iter().map(|e| e.recon).sum::<f64>() / n;

    let grad_g = if target.g() {
        let raw = mean_raw(evals.iter().map(|e| &e.raw_g), n);
        reduce_blocks(&raw, model.g.iter().map(|b| (b.raw_grad_len(), |r: &[f64]| b.reduce_grad(r))))
    } else {
        Vec::new()
    };
    let grad_h = if target.h() {
        let raw = mean_raw(evals.iter().map(|e| &e.raw_h), n);
        reduce_blocks(&raw, model.h.iter().map(|b| (b.raw_grad_len(), |r: &[f64]| b.reduce_grad(r))))
    } else {
        Vec::new()
    };

    let total = if weights.beta_ll == 0.0 { weights.alpha * recon } else { weights.beta_ll * nll + weights.alpha * recon };
    Ok(BatchEval { nll, recon, total, grad_g, grad_h })
}

/// Loss values only, evaluated without any backward pass. Used as the
/// finite-difference reference.
pub fn batch_loss(model: &CefModel, data: &Tensor, weights: LossWeights) -> Result<f64> {
    let mut nll = 0.0;
    let mut recon = 0.0;
    for i in 0..data.rows() {
        let r = model.log_prob(data.row(i))?;
        nll -= r.log_prob;
        recon += r.reconstruction_sq;
    }
    let n = data.rows() as f64;
    Ok(weights.beta_ll * nll / n + weights.alpha * recon / n)
}
