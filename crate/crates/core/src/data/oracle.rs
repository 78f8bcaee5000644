//! Stereographic reference embedding `g(z) = (2r²z₁, 2r²z₂, r(‖z‖² − r²)) / (‖z‖² + r²)`
//! with conformal factor `λ(z) = 2r² / (‖z‖² + r²)`.

use crate::error::{CefError, Result};

pub fn oracle_embed(z: &[f64], r: f64) -> [f64; 3] {
    let s = z[0] * z[0] + z[1] * z[1];
    let q = s + r * r;
    [2.0 * r * r * z[0] / q, 2.0 * r * r * z[1] / q, r * (s - r * r) / q]
}

pub fn oracle_lambda(z: &[f64], r: f64) -> f64 {
    2.0 * r * r / (z[0] * z[0] + z[1] * z[1] + r * r)
}

pub fn oracle_log_lambda(z: &[f64], r: f64) -> f64 {
    oracle_lambda(z, r).ln()
}

/// Inverse of [`oracle_embed`] for points on the radius-`r` sphere. The north
/// pole `(0, 0, r)` is not in the range.
pub fn oracle_invert(x: &[f64], r: f64) -> Result<[f64; 2]> {
    if x.len() != 3 {
        return Err(CefError::Shape(format!("sphere point must have 3 coordinates, got {}", x.len())));
    }
    let n = crate::linalg::norm(x);
    if (n - r).abs() > 1e-6 {
        return Err(CefError::Shape(format!("point at radius {n} is not on the radius-{r} sphere")));
    }
    let gap = r - x[2];
    if gap <= 1e-9 * r.max(1.0) {
        return Err(CefError::Singularity("north pole has no stereographic preimage".into()));
    }
    Ok([r * x[0] / gap, r * x[1] / gap])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_maps_to_south_pole() {
        assert_eq!(oracle_embed(&[0.0, 0.0], 1.0), [0.0, 0.0, -1.0]);
        assert_eq!(oracle_lambda(&[0.0, 0.0], 1.0), 2.0);
        assert_eq!(oracle_invert(&[0.0, 0.0, -2.0], 2.0).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn north_pole_is_singular() {
        assert!(matches!(oracle_invert(&[0.0, 0.0, 1.0], 1.0), Err(CefError::Singularity(_))));
    }

    #[test]
    fn off_sphere_rejected() {
        assert!(oracle_invert(&[0.0, 0.0, -1.1], 1.0).is_err());
    }
}
