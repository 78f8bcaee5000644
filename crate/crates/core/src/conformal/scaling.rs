use super::ConformalBlock;
use crate::error::Result;
use crate::linalg::dot;

pub fn scaling_fwd(u: &[f64], log_scale: f64) -> Vec<f64> {
    let s = log_scale.exp();
    u.iter().map(|x| s * x).collect()
}

pub fn scaling_inv(v: &[f64], log_scale: f64) -> Vec<f64> {
    let s = (-log_scale).exp();
    v.iter().map(|x| s * x).collect()
}

/// `u ↦ e^s u`, positive scale stored as its logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub dim: usize,
    pub log_scale: f64,
}

impl Scaling {
    pub fn new(dim: usize, log_scale: f64) -> Self {
        Self { dim, log_scale }
    }
}

impl ConformalBlock for Scaling {
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len("scaling input", u.len(), self.dim)?;
        Ok(scaling_fwd(u, self.log_scale))
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len("scaling input", x.len(), self.dim)?;
        Ok(scaling_inv(x, self.log_scale))
    }
    fn log_conformal_factor(&self, _u: &[f64]) -> Result<f64> {
        Ok(self.log_scale)
    }
    fn params(&self) -> Vec<f64> {
        vec![self.log_scale]
    }
    fn set_params(&mut self, p: &[f64]) {
        self.log_scale = p[0];
    }
    fn vjp(&self, u: &[f64], dy: &[f64], dl: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        let s = self.log_scale.exp();
        raw[0] += s * dot(dy, u) + dl;
        Ok(dy.iter().map(|d| s * d).collect())
    }
    fn left_inverse_vjp(&self, x: &[f64], du: &[f64], raw: &mut [f64]) -> Result<Vec<f64>> {
        let s = (-self.log_scale).exp();
        raw[0] -= s * dot(du, x);
        Ok(du.iter().map(|d| s * d).collect())
    }
}
