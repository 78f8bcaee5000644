use super::ConformalBlock;
use crate::error::{check_len, Result};
use crate::linalg::OrthoParam;

pub fn orthogonal_fwd(u: &[f64], q: &OrthoParam) -> Result<Vec<f64>> {
    q.apply(u)
}

pub fn orthogonal_inv(v: &[f64], q: &OrthoParam) -> Result<Vec<f64>> {
    q.apply_transpose(v)
}

/// `u ↦ Qu`
#[derive(Debug, Clone, PartialEq)]
pub struct Orthogonal {
    pub q: OrthoParam,
}

impl Orthogonal {
    pub fn new(q: OrthoParam) -> Self {
        Self { q }
    }
}

impl ConformalBlock for Orthogonal {
    fn in_dim(&self) -> usize {
        self.q.dim()
    }
    fn out_dim(&self) -> usize {
        self.q.dim()
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        orthogonal_fwd(u, &self.q)
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        orthogonal_inv(x, &self.q)
    }
    fn log_conformal_factor(&self, u: &[f64]) -> Result<f64> {
        check_len("orthogonal input", u.len(), self.q.dim())?;
        Ok(0.0)
    }
    fn params(&self) -> Vec<f64> {
        self.q.params().to_vec()
    }
    fn set_params(&mut self, p: &[f64]) {
        self.q.set_params(p);
    }
    fn raw_grad_len(&self) -> usize {
        self.q.raw_grad_len()
    }
    fn reduce_grad(&self, raw: &[f64]) -> Vec<f64> {
        self.q.reduce_grad(raw)
    }
    fn vjp(&self, u: &[f64], dy: &[f64], _dl: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        Ok(self.q.vjp_apply(u, dy, raw))
    }
    fn left_inverse_vjp(&self, x: &[f64], du: &[f64], raw: &mut [f64]) -> Result<Vec<f64>> {
        Ok(self.q.vjp_apply_transpose(x, du, raw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{HouseholderStack, SkewOrthogonal};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_param() {
        let q = OrthoParam::Householder(HouseholderStack::identity(3));
        assert_eq!(orthogonal_fwd(&[1.0, 2.0, 3.0], &q).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn quarter_turn() {
        let q = OrthoParam::Skew(SkewOrthogonal::new(2, vec![FRAC_PI_2]).unwrap());
        let y = orthogonal_fwd(&[1.0, 0.0], &q).unwrap();
        assert!(y[0].abs() < 1e-14 && (y[1] - 1.0).abs() < 1e-14, "{y:?}");
    }
}
