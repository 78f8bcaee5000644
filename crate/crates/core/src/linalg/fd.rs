use super::Tensor;
use crate::error::{CefError, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central-difference Jacobian of `f` at `u`, shape `[n, m]`.
pub fn fd_jacobian<F>(f: F, u: &[f64], step: f64) -> Result<Tensor>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(step > 0.0) {
        return Err(CefError::Numeric(format!("finite-difference step {step} must be positive")));
    }
    let m = u.len();
    let mut cols = Vec::with_capacity(m);
    let mut probe = u.to_vec();
    for j in 0..m {
        probe[j] = u[j] + step;
        let plus = f(&probe)?;
        probe[j] = u[j] - step;
        let minus = f(&probe)?;
        probe[j] = u[j];
        if plus.len() != minus.len() {
            return Err(CefError::Shape("function output length changed between probes".into()));
        }
        let col: Vec<f64> = plus.iter().zip(&minus).map(|(p, q)| (p - q) / (2.0 * step)).collect();
        if col.iter().any(|c| !c.is_finite()) {
            return Err(CefError::Numeric(format!("non-finite difference in column {j}")));
        }
        cols.push(col);
    }
    let n = cols.first().map_or(0, Vec::len);
    Ok(Tensor::from_rows(&cols, n)?.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map() {
        let j = fd_jacobian(|u| Ok(u.to_vec()), &[0.3, -1.0, 2.0], DEFAULT_FD_STEP).unwrap();
        let eye = Tensor::identity(3);
        assert!(super::super::max_abs_diff(j.data(), eye.data()) < 1e-9);
    }

    #[test]
    fn linear_scaling() {
        let j = fd_jacobian(|u| Ok(u.iter().map(|x| 2.5 * x).collect()), &[1.0, 2.0], 1e-5).unwrap();
        let want = Tensor::identity(2).scale(2.5);
        assert!(super::super::max_abs_diff(j.data(), want.data()) < 1e-9);
    }

    #[test]
    fn rectangular_shape() {
        let j = fd_jacobian(|u| Ok(vec![u[0], u[1], u[0] * u[1]]), &[1.0, 2.0], 1e-5).unwrap();
        assert_eq!(j.shape(), &[3, 2]);
        assert!((j.get(2, 0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn non_finite_output_is_error() {
        let r = fd_jacobian(|u| Ok(vec![1.0 / (u[0] - 1e-6).abs().min(0.0)]), &[0.0], 1e-5);
        assert!(matches!(r, Err(CefError::Numeric(_))));
        assert!(fd_jacobian(|u| Ok(u.to_vec()), &[0.0], 0.0).is_err());
    }
}
