use super::ConformalBlock;
use crate::error::{check_len, Result};
use crate::linalg::OrthoParam;

/// `u ↦ [ReLU(Qu); ReLU(−Qu)]`
pub fn conformal_relu_fwd(u: &[f64], q: &OrthoParam) -> Result<Vec<f64>> {
    let qu = q.apply(u)?;
    let mut out: Vec<f64> = qu.iter().map(|x| x.max(0.0)).collect();
    out.extend(qu.iter().map(|x| (-x).max(0.0)));
    Ok(out)
}

/// `[v₁; v₂] ↦ Qᵀ(v₁ − v₂)`, applied to any input without checking that
/// `v₁ ⊙ v₂ = 0`.
pub fn conformal_relu_inv(v: &[f64], q: &OrthoParam) -> Result<Vec<f64>> {
    let d = q.dim();
    check_len("conformal ReLU left-inverse input", v.len(), 2 * d)?;
    let diff: Vec<f64> = v[..d].iter().zip(&v[d..]).map(|(a, b)| a - b).collect();
    q.apply_transpose(&diff)
}

/// Piecewise-conformal ReLU, doubling the dimension; `λ = 1` off the
/// coordinate hyperplanes of `Qu`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalRelu {
    pub q: OrthoParam,
}

impl ConformalBlock for ConformalRelu {
    fn in_dim(&self) -> usize {
        self.q.dim()
    }
    fn out_dim(&self) -> usize {
        2 * self.q.dim()
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        conformal_relu_fwd(u, &self.q)
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        conformal_relu_inv(x, &self.q)
    }
    fn log_conformal_factor(&self, _u: &[f64]) -> Result<f64> {
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
        let d = self.q.dim();
        let qu = self.q.apply(u)?;
        let dqu: Vec<f64> = (0..d)
            .map(|i| {
                if qu[i] > 0.0 {
                    dy[i]
                } else if qu[i] < 0.0 {
                    -dy[d + i]
                } else {
                    0.0
                }
            })
            .collect();
        Ok(self.q.vjp_apply(u, &dqu, raw))
    }
    fn left_inverse_vjp(&self, x: &[f64], du: &[f64], raw: &mut [f64]) -> Result<Vec<f64>> {
        let d = self.q.dim();
        let diff: Vec<f64> = x[..d].iter().zip(&x[d..]).map(|(a, b)| a - b).collect();
        let dd = self.q.vjp_apply_transpose(&diff, du, raw);
        let mut dx = dd.clone();
        dx.extend(dd.iter().map(|v| -v));
        Ok(dx)
    }
}
