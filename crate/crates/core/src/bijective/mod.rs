//! Dimension-preserving flow stump `h`.
//!
//! Blocks are written in the generative direction `z ↦ y`; `log_det` always
//! means `log|det ∂y/∂z|`, whichever direction it was computed from.

mod actnorm;
mod coupling;
mod inv_conv;
mod mlp;

pub use actnorm::ActNorm;
pub use coupling::{AffineCoupling, S_MAX};
pub use inv_conv::InvConv1x1;
pub use mlp::Mlp;

use crate::error::Result;

pub trait BijectiveBlock {
    fn dim(&self) -> usize;

    /// `(y, log|det ∂y/∂z|)`
    fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)>;

    /// `(z, log|det ∂y/∂z|)` evaluated at the recovered `z`.
    fn inverse(&self, y: &[f64]) -> Result<(Vec<f64>, f64)>;

    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]);

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn raw_grad_len(&self) -> usize {
        self.num_params()
    }

    fn reduce_grad(&self, raw: &[f64]) -> Vec<f64> {
        raw.to_vec()
    }

    /// Reverse mode through `forward`: cotangents on `y` and on the log-det.
    fn forward_vjp(&self, z: &[f64], dy: &[f64], dlog_det: f64, raw: &mut [f64]) -> Result<Vec<f64>>;

    /// Reverse mode through `inverse`: cotangents on `z` and on the log-det.
    fn inverse_vjp(&self, y: &[f64], dz: &[f64], dlog_det: f64, raw: &mut [f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum BijectiveLayer {
    ActNorm(ActNorm),
    InvConv1x1(InvConv1x1),
    AffineCoupling(AffineCoupling),
}

macro_rules! dispatch {
    ($self:ident, $b:ident => $e:expr) => {
        match $self {
            BijectiveLayer::ActNorm($b) => $e,
            BijectiveLayer::InvConv1x1($b) => $e,
            BijectiveLayer::AffineCoupling($b) => $e,
        }
    };
}

impl BijectiveLayer {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ActNorm(_) => "actnorm",
            Self::InvConv1x1(_) => "inv_conv1x1",
            Self::AffineCoupling(_) => "affine_coupling",
        }
    }
}

impl BijectiveBlock for BijectiveLayer {
    fn dim(&self) -> usize {
        dispatch!(self, b => b.dim())
    }
    fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        dispatch!(self, b => b.forward(z))
    }
    fn inverse(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        dispatch!(self, b => b.inverse(y))
    }
    fn params(&self) -> Vec<f64> {
        dispatch!(self, b => b.params())
    }
    fn set_params(&mut self, p: &[f64]) {
        dispatch!(self, b => b.set_params(p))
    }
    fn num_params(&self) -> usize {
        dispatch!(self, b => b.num_params())
    }
    fn raw_grad_len(&self) -> usize {
        dispatch!(self, b => b.raw_grad_len())
    }
    fn reduce_grad(&self, raw: &[f64]) -> Vec<f64> {
        dispatch!(self, b => b.reduce_grad(raw))
    }
    fn forward_vjp(&self, z: &[f64], dy: &[f64], dld: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        dispatch!(self, b => b.forward_vjp(z, dy, dld, raw))
    }
    fn inverse_vjp(&self, y: &[f64], dz: &[f64], dld: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        dispatch!(self, b => b.inverse_vjp(y, dz, dld, raw))
    }
}

impl From<ActNorm> for BijectiveLayer {
    fn from(b: ActNorm) -> Self {
        Self::ActNorm(b)
    }
}
impl From<InvConv1x1> for BijectiveLayer {
    fn from(b: InvConv1x1) -> Self {
        Self::InvConv1x1(b)
    }
}
impl From<AffineCoupling> for BijectiveLayer {
    fn from(b: AffineCoupling) -> Self {
        Self::AffineCoupling(b)
    }
}

/// Generative pass through a stack: returns `y` and the summed log-det.
pub fn stack_forward(blocks: &[BijectiveLayer], z: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut cur = z.to_vec();
    let mut ld = 0.0;
    for b in blocks {
        let (next, l) = b.forward(&cur)?;
        cur = next;
        ld += l;
    }
    Ok((cur, ld))
}

/// Normalizing pass: returns `z = h⁻¹(y)` and `log|det J_h(z)|`.
pub fn stack_inverse(blocks: &[BijectiveLayer], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut cur = y.to_vec();
    let mut ld = 0.0;
    for b in blocks.iter().rev() {
        let (prev, l) = b.inverse(&cur)?;
        cur = prev;
        ld += l;
    }
    Ok((cur, ld))
}
