use super::ConformalBlock;
use crate::error::{check_len, CefError, Result};

/// Appends `n − m` zeros.
pub fn pad_zeros_fwd(u: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < u.len() {
        return Err(CefError::Shape(format!("cannot pad length {} down to {n}", u.len())));
    }
    let mut out = u.to_vec();
    out.resize(n, 0.0);
    Ok(out)
}

/// Drops the padded tail.
pub fn pad_zeros_inv(x: &[f64], m: usize) -> Result<Vec<f64>> {
    if x.len() < m {
        return Err(CefError::Shape(format!("cannot unpad length {} to {m}", x.len())));
    }
    Ok(x[..m].to_vec())
}

/// Zero padding `ℝ^m → ℝ^n` at the tail of the flattened vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Padding {
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Padding {
    pub fn new(in_dim: usize, out_dim: usize) -> Result<Self> {
        if out_dim < in_dim {
            return Err(CefError::Shape(format!("padding {in_dim} → {out_dim} shrinks")));
        }
        Ok(Self { in_dim, out_dim })
    }
}

impl ConformalBlock for Padding {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("padding input", u.len(), self.in_dim)?;
        pad_zeros_fwd(u, self.out_dim)
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("padding left-inverse input", x.len(), self.out_dim)?;
        pad_zeros_inv(x, self.in_dim)
    }
    fn log_conformal_factor(&self, _u: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
    fn params(&self) -> Vec<f64> {
        Vec::new()
    }
    fn set_params(&mut self, _p: &[f64]) {}
    fn vjp(&self, _u: &[f64], dy: &[f64], _dl: f64, _raw: &mut [f64]) -> Result<Vec<f64>> {
        Ok(dy[..self.in_dim].to_vec())
    }
    fn left_inverse_vjp(&self, _x: &[f64], du: &[f64], _raw: &mut [f64]) -> Result<Vec<f64>> {
        pad_zeros_fwd(du, self.out_dim)
    }
}
