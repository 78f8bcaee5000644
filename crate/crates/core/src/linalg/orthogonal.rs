use super::{HouseholderStack, SkewOrthogonal, Tensor};
use crate::error::{check_len, Result};

/// A trainable orthogonal matrix under either parameterization.
///
/// Gradients are accumulated into a "raw" buffer first. For Householder stacks
/// the raw buffer is the parameter gradient itself; for the skew exponential it
/// is the gradient with respect to the materialized `Q`, which is only pulled
/// back through the exponential once per batch by [`OrthoParam::reduce_grad`].
#[derive(Debug, Clone, PartialEq)]
pub enum OrthoParam {
    Householder(HouseholderStack),
    Skew(SkewOrthogonal),
}

impl OrthoParam {
    pub fn dim(&self) -> usize {
        match self {
            Self::Householder(h) => h.dim(),
            Self::Skew(s) => s.dim(),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Self::Householder(h) => h.params(),
            Self::Skew(s) => s.params(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) {
        match self {
            Self::Householder(h) => h.params_mut().copy_from_slice(p),
            Self::Skew(s) => s.set_params(p),
        }
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Householder(h) => h.apply(v),
            Self::Skew(s) => {
                check_len("orthogonal input", v.len(), s.dim())?;
                Ok(s.matrix().matvec(v))
            }
        }
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Householder(h) => h.apply_transpose(v),
            Self::Skew(s) => {
                check_len("orthogonal input", v.len(), s.dim())?;
                Ok(s.matrix().matvec_t(v))
            }
        }
    }

    pub fn matrix(&self) -> Tensor {
        match self {
            Self::Householder(h) => h.matrix(),
            Self::Skew(s) => s.matrix().clone(),
        }
    }

    pub fn raw_grad_len(&self) -> usize {
        match self {
            Self::Householder(h) => h.params().len(),
            Self::Skew(s) => s.dim() * s.dim(),
        }
    }

    /// Cotangent of `y = Qv`: returns `dv`, accumulates into `raw`.
    pub fn vjp_apply(&self, v: &[f64], dy: &[f64], raw: &mut [f64]) -> Vec<f64> {
        match self {
            Self::Householder(h) => h.vjp_apply(v, dy, raw),
            Self::Skew(s) => {
                let d = s.dim();
                for i in 0..d {
                    super::axpy(dy[i], v, &mut raw[i * d..(i + 1) * d]);
                }
                s.matrix().matvec_t(dy)
            }
        }
    }

    /// Cotangent of `x = Qᵀy`: returns `dy`, accumulates into `raw`.
    pub fn vjp_apply_transpose(&self, y: &[f64], dx: &[f64], raw: &mut [f64]) -> Vec<f64> {
        match self {
            Self::Householder(h) => h.vjp_apply_transpose(y, dx, raw),
            Self::Skew(s) => {
                let d = s.dim();
                for i in 0..d {
                    super::axpy(y[i], dx, &mut raw[i * d..(i + 1) * d]);
                }
                s.matrix().matvec(dx)
            }
        }
    }

    pub fn reduce_grad(&self, raw: &[f64]) -> Vec<f64> {
        match self {
            Self::Householder(_) => raw.to_vec(),
            Self::Skew(s) => s.matrix_grad_to_params(raw),
        }
    }
}
