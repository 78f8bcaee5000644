use super::ConformalBlock;
use crate::error::{check_len, Result};

pub fn translation_fwd(u: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    check_len("translation input", u.len(), a.len())?;
    Ok(u.iter().zip(a).map(|(x, s)| x + s).collect())
}

pub fn translation_inv(v: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    check_len("translation input", v.len(), a.len())?;
    Ok(v.iter().zip(a).map(|(x, s)| x - s).collect())
}

/// `u ↦ u + a`
#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub shift: Vec<f64>,
}

impl Translation {
    pub fn new(shift: Vec<f64>) -> Self {
        Self { shift }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { shift: vec![0.0; dim] }
    }
}

impl ConformalBlock for Translation {
    fn in_dim(&self) -> usize {
        self.shift.len()
    }
    fn out_dim(&self) -> usize {
        self.shift.len()
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        translation_fwd(u, &self.shift)
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        translation_inv(x, &self.shift)
    }
    fn log_conformal_factor(&self, u: &[f64]) -> Result<f64> {
        check_len("translation input", u.len(), self.shift.len())?;
        Ok(0.0)
    }
    fn params(&self) -> Vec<f64> {
        self.shift.clone()
    }
    fn set_params(&mut self, p: &[f64]) {
        self.shift.copy_from_slice(p);
    }
    fn vjp(&self, _u: &[f64], dy: &[f64], _dl: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        crate::linalg::axpy(1.0, dy, raw);
        Ok(dy.to_vec())
    }
    fn left_inverse_vjp(&self, _x: &[f64], du: &[f64], raw: &mut [f64]) -> Result<Vec<f64>> {
        crate::linalg::axpy(-1.0, du, raw);
        Ok(du.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shift_is_identity() {
        assert_eq!(translation_fwd(&[1.5, -2.0], &[0.0, 0.0]).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn direct_sum() {
        assert_eq!(translation_fwd(&[1.0, 1.0], &[2.0, -1.0]).unwrap(), vec![3.0, 0.0]);
    }

    #[test]
    fn vjp_passes_cotangent_through() {
        let t = Translation::new(vec![0.3, 0.1]);
        let mut raw = vec![0.0; 2];
        let du = t.vjp(&[1.0, 2.0], &[0.5, -1.0], 0.0, &mut raw).unwrap();
        assert_eq!(du, vec![0.5, -1.0]);
        assert_eq!(raw, vec![0.5, -1.0]);
    }
}
