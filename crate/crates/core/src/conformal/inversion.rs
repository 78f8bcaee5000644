use super::{ConformalBlock, EPSILON_SINGULAR};
use crate::error::{CefError, Result};
use crate::linalg::{dot, norm_sq};

/// `u ↦ u/‖u‖²`; self-inverse.
pub fn inversion_fwd(u: &[f64]) -> Result<Vec<f64>> {
    let s = checked_norm_sq(u)?;
    Ok(u.iter().map(|x| x / s).collect())
}

fn checked_norm_sq(u: &[f64]) -> Result<f64> {
    let s = norm_sq(u);
    if s.sqrt() <= EPSILON_SINGULAR {
        return Err(CefError::Singularity(format!("inversion at ‖u‖ = {:e}", s.sqrt())));
    }
    Ok(s)
}

/// Reverse mode through `u/‖u‖²` and `log λ = −log‖u‖²`.
fn inversion_vjp(u: &[f64], dy: &[f64], dl: f64) -> Result<Vec<f64>> {
    let s = checked_norm_sq(u)?;
    let ud = dot(u, dy);
    Ok(u.iter().zip(dy).map(|(ui, di)| (di - 2.0 * ui * ud / s) / s - 2.0 * dl * ui / s).collect())
}

/// Sphere inversion. Kept out of the default trainable catalog: it has no
/// parameters and no identity element, and its pole sits at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub dim: usize,
}

impl ConformalBlock for Inversion {
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        inversion_fwd(u)
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        inversion_fwd(x)
    }
    fn log_conformal_factor(&self, u: &[f64]) -> Result<f64> {
        Ok(-checked_norm_sq(u)?.ln())
    }
    fn params(&self) -> Vec<f64> {
        Vec::new()
    }
    fn set_params(&mut self, _p: &[f64]) {}
    fn vjp(&self, u: &[f64], dy: &[f64], dl: f64, _raw: &mut [f64]) -> Result<Vec<f64>> {
        inversion_vjp(u, dy, dl)
    }
    fn left_inverse_vjp(&self, x: &[f64], du: &[f64], _raw: &mut [f64]) -> Result<Vec<f64>> {
        inversion_vjp(x, du, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vectors_are_fixed() {
        let u = [0.6, 0.8];
        let y = inversion_fwd(&u).unwrap();
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn halves_length_two() {
        assert_eq!(inversion_fwd(&[2.0, 0.0]).unwrap(), vec![0.5, 0.0]);
    }

    #[test]
    fn origin_is_singular() {
        assert!(matches!(inversion_fwd(&[0.0, 0.0]), Err(CefError::Singularity(_))));
        assert!(matches!(inversion_fwd(&[1e-13, 0.0]), Err(CefError::Singularity(_))));
    }
}
