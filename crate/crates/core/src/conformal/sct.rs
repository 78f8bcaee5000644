use super::{ConformalBlock, EPSILON_SINGULAR};
use crate::error::{check_len, CefError, Result};
use crate::linalg::{dot, norm_sq};

/// `1 − 2b·u + ‖b‖²‖u‖²`
pub fn sct_denominator(u: &[f64], b: &[f64]) -> f64 {
    1.0 - 2.0 * dot(b, u) + norm_sq(b) * norm_sq(u)
}

fn checked_denominator(u: &[f64], b: &[f64]) -> Result<f64> {
    check_len("SCT input", u.len(), b.len())?;
    let den = sct_denominator(u, b);
    if den.abs() <= EPSILON_SINGULAR {
        return Err(CefError::Singularity(format!("SCT denominator {den:e}")));
    }
    Ok(den)
}

/// Special conformal transformation `u ↦ (u − ‖u‖²b) / (1 − 2b·u + ‖b‖²‖u‖²)`.
pub fn sct_fwd(u: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let den = checked_denominator(u, b)?;
    let uu = norm_sq(u);
    Ok(u.iter().zip(b).map(|(ui, bi)| (ui - uu * bi) / den).collect())
}

/// Inverse SCT, `v ↦ (v + ‖v‖²b) / (1 + 2b·v + ‖b‖²‖v‖²)`, i.e. the SCT with `−b`.
pub fn sct_inv(v: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let neg: Vec<f64> = b.iter().map(|x| -x).collect();
    sct_fwd(v, &neg)
}

/// Reverse mode through the SCT output and `log λ = −log|den|`.
/// Returns `(du, db)`.
fn sct_vjp(u: &[f64], b: &[f64], dy: &[f64], dl: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let den = checked_denominator(u, b)?;
    let y = sct_fwd(u, b)?;
    let uu = norm_sq(u);
    let bb = norm_sq(b);
    let bdy = dot(b, dy);
    // Scalar weight on ∂den, from both the output quotient and the log factor.
    let w = (dot(dy, &y) + dl) / den;
    let du = (0..u.len())
        .map(|i| (dy[i] - 2.0 * u[i] * bdy) / den - w * (-2.0 * b[i] + 2.0 * bb * u[i]))
        .collect();
    let db = (0..u.len())
        .map(|i| -uu * dy[i] / den - w * (-2.0 * u[i] + 2.0 * uu * b[i]))
        .collect();
    Ok((du, db))
}

/// Trainable SCT block; `b = 0` is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Sct {
    pub b: Vec<f64>,
}

impl Sct {
    pub fn new(b: Vec<f64>) -> Self {
        Self { b }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { b: vec![0.0; dim] }
    }

    fn neg_b(&self) -> Vec<f64> {
        self.b.iter().map(|x| -x).collect()
    }
}

impl ConformalBlock for Sct {
    fn in_dim(&self) -> usize {
        self.b.len()
    }
    fn out_dim(&self) -> usize {
        self.b.len()
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        sct_fwd(u, &self.b)
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        sct_inv(x, &self.b)
    }
    fn log_conformal_factor(&self, u: &[f64]) -> Result<f64> {
        Ok(-checked_denominator(u, &self.b)?.abs().ln())
    }
    fn params(&self) -> Vec<f64> {
        self.b.clone()
    }
    fn set_params(&mut self, p: &[f64]) {
        self.b.copy_from_slice(p);
    }
    fn vjp(&self, u: &[f64], dy: &[f64], dl: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        let (du, db) = sct_vjp(u, &self.b, dy, dl)?;
        crate::linalg::axpy(1.0, &db, raw);
        Ok(du)
    }
    fn left_inverse_vjp(&self, x: &[f64], du: &[f64], raw: &mut [f64]) -> Result<Vec<f64>> {
        let (dx, dneg) = sct_vjp(x, &self.neg_b(), du, 0.0)?;
        crate::linalg::axpy(-1.0, &dneg, raw);
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_b_is_identity() {
        let u = [0.3, -1.0, 2.0];
        assert_eq!(sct_fwd(&u, &[0.0; 3]).unwrap(), u.to_vec());
        assert_eq!(Sct::zeros(3).log_conformal_factor(&u).unwrap(), 0.0);
        assert_eq!(sct_inv(&u, &[0.0; 3]).unwrap(), u.to_vec());
    }

    #[test]
    fn roundtrip_hundred_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b = [0.1, 0.0, 0.0];
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let back = sct_inv(&sct_fwd(&u, &b).unwrap(), &b).unwrap();
            worst = worst.max(max_abs_diff(&back, &u));
        }
        assert!(worst < 1e-8, "worst roundtrip error {worst:e}");
    }

    #[test]
    fn pole_is_singular() {
        // den vanishes at u = b/‖b‖²
        let b = [0.5, 0.0];
        assert!(matches!(sct_fwd(&[2.0, 0.0], &b), Err(CefError::Singularity(_))));
    }
}
