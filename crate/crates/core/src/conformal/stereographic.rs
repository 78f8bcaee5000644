use super::ConformalBlock;
use crate::data::oracle;
use crate::error::{check_len, CefError, Result};
use crate::linalg::{dot, norm};

/// Fixed stereographic embedding `ℝ² → ℝ³` onto the radius-`r` sphere.
/// Its left-inverse projects radially onto the sphere first, so it accepts any
/// point away from the origin and the north pole.
#[derive(Debug, Clone, PartialEq)]
pub struct Stereographic {
    pub radius: f64,
}

impl Stereographic {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(CefError::Config(format!("stereographic radius {radius} must be positive")));
        }
        Ok(Self { radius })
    }

    fn to_sphere(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("stereographic left-inverse input", x.len(), 3)?;
        let n = norm(x);
        if n <= super::EPSILON_SINGULAR {
            return Err(CefError::Singularity("radial projection of the origin".into()));
        }
        Ok((n, x.iter().map(|v| self.radius * v / n).collect()))
    }
}

impl ConformalBlock for Stereographic {
    fn in_dim(&self) -> usize {
        2
    }
    fn out_dim(&self) -> usize {
        3
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("stereographic input", u.len(), 2)?;
        Ok(oracle::oracle_embed(u, self.radius).to_vec())
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, p) = self.to_sphere(x)?;
        Ok(oracle::oracle_invert(&p, self.radius)?.to_vec())
    }
    fn log_conformal_factor(&self, u: &[f64]) -> Result<f64> {
        check_len("stereographic input", u.len(), 2)?;
        Ok(oracle::oracle_log_lambda(u, self.radius))
    }
    fn params(&self) -> Vec<f64> {
        Vec::new()
    }
    fn set_params(&mut self, _p: &[f64]) {}
    fn vjp(&self, u: &[f64], dy: &[f64], dl: f64, _raw: &mut [f64]) -> Result<Vec<f64>> {
        let r = self.radius;
        let s = u[0] * u[0] + u[1] * u[1];
        let q = s + r * r;
        let du = (0..2)
            .map(|j| {
                let mut acc = 0.0;
                for i in 0..2 {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    acc += dy[i] * 2.0 * r * r * (delta / q - 2.0 * u[i] * u[j] / (q * q));
                }
                acc += dy[2] * 4.0 * r.powi(3) * u[j] / (q * q);
                acc - dl * 2.0 * u[j] / q
            })
            .collect();
        Ok(du)
    }
    fn left_inverse_vjp(&self, x: &[f64], du: &[f64], _raw: &mut [f64]) -> Result<Vec<f64>> {
        let r = self.radius;
        let (n, p) = self.to_sphere(x)?;
        let gap = r - p[2];
        let dp = [
            r * du[0] / gap,
            r * du[1] / gap,
            r * (p[0] * du[0] + p[1] * du[1]) / (gap * gap),
        ];
        let unit: Vec<f64> = x.iter().map(|v| v / n).collect();
        let radial = dot(&unit, &dp);
        Ok((0..3).map(|i| r / n * (dp[i] - unit[i] * radial)).collect())
    }
}
