use super::{ortho_raw_split, ConformalBlock};
use crate::error::{check_len, Result};
use crate::linalg::{norm, OrthoParam};

/// `Q₁u` inside the open unit ball, `Q₂u` on and outside it. Orthogonal maps
/// keep `‖u‖`, so the inverse can branch on the output norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalOrthogonal {
    pub inner: OrthoParam,
    pub outer: OrthoParam,
}

impl ConditionalOrthogonal {
    pub fn new(inner: OrthoParam, outer: OrthoParam) -> Result<Self> {
        check_len("conditional orthogonal outer dimension", outer.dim(), inner.dim())?;
        Ok(Self { inner, outer })
    }

    fn branch(&self, v: &[f64]) -> (bool, &OrthoParam) {
        if norm(v) < 1.0 {
            (true, &self.inner)
        } else {
            (false, &self.outer)
        }
    }
}

impl ConformalBlock for ConditionalOrthogonal {
    fn in_dim(&self) -> usize {
        self.inner.dim()
    }
    fn out_dim(&self) -> usize {
        self.inner.dim()
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.branch(u).1.apply(u)
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.branch(x).1.apply_transpose(x)
    }
    fn log_conformal_factor(&self, _u: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
    fn params(&self) -> Vec<f64> {
        let mut p = self.inner.params().to_vec();
        p.extend_from_slice(self.outer.params());
        p
    }
    fn set_params(&mut self, p: &[f64]) {
        let (a, b) = p.split_at(self.inner.params().len());
        self.inner.set_params(a);
        self.outer.set_params(b);
    }
    fn raw_grad_len(&self) -> usize {
        self.inner.raw_grad_len() + self.outer.raw_grad_len()
    }
    fn reduce_grad(&self, raw: &[f64]) -> Vec<f64> {
        let (a, b) = raw.split_at(self.inner.raw_grad_len());
        let mut g = self.inner.reduce_grad(a);
        g.extend(self.outer.reduce_grad(b));
        g
    }
    fn vjp(&self, u: &[f64], dy: &[f64], _dl: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        let (ri, ro) = ortho_raw_split(&self.inner, raw);
        Ok(match self.branch(u) {
            (true, q) => q.vjp_apply(u, dy, ri),
            (false, q) => q.vjp_apply(u, dy, ro),
        })
    }
    fn left_inverse_vjp(&self, x: &[f64], du: &[f64], raw: &mut [f64]) -> Result<Vec<f64>> {
        let (ri, ro) = ortho_raw_split(&self.inner, raw);
        Ok(match self.branch(x) {
            (true, q) => q.vjp_apply_transpose(x, du, ri),
            (false, q) => q.vjp_apply_transpose(x, du, ro),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{HouseholderStack, SkewOrthogonal};

    #[test]
    fn identity_pair() {
        let c = ConditionalOrthogonal::new(
            OrthoParam::Householder(HouseholderStack::identity(2)),
            OrthoParam::Householder(HouseholderStack::identity(2)),
        )
        .unwrap();
        assert_eq!(c.forward(&[0.2, 3.0]).unwrap(), vec![0.2, 3.0]);
    }

    #[test]
    fn unit_norm_takes_outer_branch() {
        let c = ConditionalOrthogonal::new(
            OrthoParam::Householder(HouseholderStack::identity(2)),
            OrthoParam::Skew(SkewOrthogonal::new(2, vec![std::f64::consts::PI]).unwrap()),
        )
        .unwrap();
        let y = c.forward(&[1.0, 0.0]).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-12);
    }
}
