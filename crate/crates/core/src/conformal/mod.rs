//! Conformal and piecewise-conformal building blocks `g_i`.
//!
//! Each block maps `ℝ^m → ℝ^n` (`n ≥ m`), has a left-inverse on its range,
//! and a closed-form conformal factor `λ(u)` with `JᵀJ = λ²I`. Parameter
//! gradients go through a per-block raw buffer (see [`ConformalBlock::raw_grad_len`]).

mod conditional;
mod conv;
mod inversion;
mod orthogonal;
mod padding;
mod relu;
mod scaling;
mod sct;
mod stereographic;
mod translation;

pub use conditional::ConditionalOrthogonal;
pub use conv::{ortho_conv_fwd, ortho_conv_inv, OrthoConv};
pub use inversion::{inversion_fwd, Inversion};
pub use orthogonal::{orthogonal_fwd, orthogonal_inv, Orthogonal};
pub use padding::{pad_zeros_fwd, pad_zeros_inv, Padding};
pub use relu::{conformal_relu_fwd, conformal_relu_inv, ConformalRelu};
pub use scaling::{scaling_fwd, scaling_inv, Scaling};
pub use sct::{sct_denominator, sct_fwd, sct_inv, Sct};
pub use stereographic::Stereographic;
pub use translation::{translation_fwd, translation_inv, Translation};

use crate::error::Result;

/// Guard radius around the singular points of inversion and SCT.
pub const EPSILON_SINGULAR: f64 = 1e-12;

pub trait ConformalBlock {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;

    fn forward(&self, u: &[f64]) -> Result<Vec<f64>>;

    /// Left-inverse `g†`, defined on all of `ℝ^n` (a projection off the range).
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// `log|λ(u)|`
    fn log_conformal_factor(&self, u: &[f64]) -> Result<f64>;

    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]);

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn raw_grad_len(&self) -> usize {
        self.num_params()
    }

    /// Turns an accumulated raw buffer into a parameter gradient.
    fn reduce_grad(&self, raw: &[f64]) -> Vec<f64> {
        raw.to_vec()
    }

    /// Reverse-mode product through both `y = g(u)` and `log λ(u)`.
    /// Returns `du`; parameter contributions are added to `raw`.
    fn vjp(&self, u: &[f64], dy: &[f64], dlog_lambda: f64, raw: &mut [f64]) -> Result<Vec<f64>>;

    /// Reverse-mode product through `u = g†(x)`. Returns `dx`.
    fn left_inverse_vjp(&self, x: &[f64], du: &[f64], raw: &mut [f64]) -> Result<Vec<f64>>;
}

/// Closed set of conformal blocks, used to build serializable models.
#[derive(Debug, Clone, PartialEq)]
pub enum ConformalLayer {
    Translation(Translation),
    Orthogonal(Orthogonal),
    Scaling(Scaling),
    Inversion(Inversion),
    Sct(Sct),
    Padding(Padding),
    ConformalRelu(ConformalRelu),
    ConditionalOrthogonal(ConditionalOrthogonal),
    OrthoConv(OrthoConv),
    Stereographic(Stereographic),
}

macro_rules! dispatch {
    ($self:ident, $b:ident => $e:expr) => {
        match $self {
            ConformalLayer::Translation($b) => $e,
            ConformalLayer::Orthogonal($b) => $e,
            ConformalLayer::Scaling($b) => $e,
            ConformalLayer::Inversion($b) => $e,
            ConformalLayer::Sct($b) => $e,
            ConformalLayer::Padding($b) => $e,
            ConformalLayer::ConformalRelu($b) => $e,
            ConformalLayer::ConditionalOrthogonal($b) => $e,
            ConformalLayer::OrthoConv($b) => $e,
            ConformalLayer::Stereographic($b) => $e,
        }
    };
}

impl ConformalLayer {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Translation(_) => "translation",
            Self::Orthogonal(_) => "orthogonal",
            Self::Scaling(_) => "scaling",
            Self::Inversion(_) => "inversion",
            Self::Sct(_) => "sct",
            Self::Padding(_) => "pad",
            Self::ConformalRelu(_) => "conformal_relu",
            Self::ConditionalOrthogonal(_) => "conditional_orthogonal",
            Self::OrthoConv(_) => "ortho_conv",
            Self::Stereographic(_) => "stereographic",
        }
    }
}

impl ConformalBlock for ConformalLayer {
    fn in_dim(&self) -> usize {
        dispatch!(self, b => b.in_dim())
    }
    fn out_dim(&self) -> usize {
        dispatch!(self, b => b.out_dim())
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, b => b.forward(u))
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, b => b.left_inverse(x))
    }
    fn log_conformal_factor(&self, u: &[f64]) -> Result<f64> {
        dispatch!(self, b => b.log_conformal_factor(u))
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
    fn vjp(&self, u: &[f64], dy: &[f64], dlog_lambda: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        dispatch!(self, b => b.vjp(u, dy, dlog_lambda, raw))
    }
    fn left_inverse_vjp(&self, x: &[f64], du: &[f64], raw: &mut [f64]) -> Result<Vec<f64>> {
        dispatch!(self, b => b.left_inverse_vjp(x, du, raw))
    }
}

macro_rules! impl_from {
    ($($v:ident),*) => {
        $(impl From<$v> for ConformalLayer {
            fn from(b: $v) -> Self {
                ConformalLayer::$v(b)
            }
        })*
    };
}
impl_from!(
    Translation,
    Orthogonal,
    Scaling,
    Inversion,
    Sct,
    Padding,
    ConformalRelu,
    ConditionalOrthogonal,
    OrthoConv,
    Stereographic
);

/// Applies `blocks` in order.
pub fn compose_forward(blocks: &[ConformalLayer], u: &[f64]) -> Result<Vec<f64>> {
    let mut cur = u.to_vec();
    for b in blocks {
        cur = b.forward(&cur)?;
    }
    Ok(cur)
}

/// Left-inverse of the composite: block left-inverses in reverse order.
pub fn compose_left_inverse(blocks: &[ConformalLayer], x: &[f64]) -> Result<Vec<f64>> {
    let mut cur = x.to_vec();
    for b in blocks.iter().rev() {
        cur = b.left_inverse(&cur)?;
    }
    Ok(cur)
}

/// `log λ` of the composite at `u`: the sum of block factors at the
/// intermediate points.
pub fn compose_log_conformal_factor(blocks: &[ConformalLayer], u: &[f64]) -> Result<f64> {
    let mut cur = u.to_vec();
    let mut acc = 0.0;
    for b in blocks {
        acc += b.log_conformal_factor(&cur)?;
        cur = b.forward(&cur)?;
    }
    Ok(acc)
}

pub(crate) fn ortho_raw_split<'a>(
    q1: &crate::linalg::OrthoParam,
    raw: &'a mut [f64],
) -> (&'a mut [f64], &'a mut [f64]) {
    raw.split_at_mut(q1.raw_grad_len())
}
