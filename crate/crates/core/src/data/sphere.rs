use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{CefError, Result};
use crate::linalg::{dot, norm, Tensor};

/// Radially projected `N(μ, I₃)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereDatasetConfig {
    pub mu: [f64; 3],
    pub count: usize,
    pub seed: u64,
}

impl Default for SphereDatasetConfig {
    fn default() -> Self {
        Self { mu: [-1.0, -1.0, 0.0], count: 1000, seed: 0 }
    }
}

pub fn sample_sphere_dataset(cfg: &SphereDatasetConfig) -> Result<Tensor> {
    if cfg.count == 0 {
        return Err(CefError::Config("sphere dataset needs count ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data = Vec::with_capacity(3 * cfg.count);
    for _ in 0..cfg.count {
        loop {
            let x: Vec<f64> = cfg.mu.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect();
            let n = norm(&x);
            if n >= 1e-12 {
                data.extend(x.iter().map(|v| v / n));
                break;
            }
        }
    }
    Tensor::new(vec![cfg.count, 3], data)
}

/// Standard normal samples in `dim` dimensions.
pub fn sample_gaussian_dataset(dim: usize, count: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..dim * count).map(|_| StandardNormal.sample(&mut rng)).collect();
    Tensor::new(vec![count, dim], data).expect("sized")
}

/// Unit direction `(cos φ sin θ, sin φ sin θ, cos θ)`.
pub fn direction(phi: f64, theta: f64) -> [f64; 3] {
    [phi.cos() * theta.sin(), phi.sin() * theta.sin(), theta.cos()]
}

/// Density of the projected Gaussian with respect to surface area on the unit
/// sphere, at unit direction `t`.
pub fn target_density_direction(t: &[f64], mu: &[f64; 3]) -> f64 {
    let a = dot(t, mu);
    let mm = dot(mu, mu);
    let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
    // 1 + erf(a/√2) == erfc(−a/√2), which keeps precision for negative a
    let inner = 2.0 * a + sqrt_2pi * (a * a + 1.0) * (a * a / 2.0).exp() * erfc(-a / std::f64::consts::SQRT_2);
    (-mm / 2.0).exp() * inner / (2f64.powf(2.5) * std::f64::consts::PI.powf(1.5))
}

pub fn target_density_sphere(phi: f64, theta: f64, mu: &[f64; 3]) -> f64 {
    target_density_direction(&direction(phi, theta), mu)
}

/// Log target density at the radial projection of `x`.
pub fn target_log_density(x: &[f64], mu: &[f64; 3]) -> f64 {
    let n = norm(x);
    let t: Vec<f64> = x.iter().map(|v| v / n).collect();
    target_density_direction(&t, mu).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_is_uniform() {
        let want = 1.0 / (4.0 * std::f64::consts::PI);
        for (phi, theta) in [(0.0, 0.0), (1.0, 2.0), (4.0, 0.3)] {
            assert!((target_density_sphere(phi, theta, &[0.0; 3]) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_concentrates_toward_mean() {
        let mu = [-1.0, -1.0, 0.0];
        let toward = [-1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
        let away = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0];
        assert!(target_density_direction(&toward, &mu) > target_density_direction(&away, &mu));
    }

    #[test]
    fn samples_on_unit_sphere() {
        let t = sample_sphere_dataset(&SphereDatasetConfig { count: 500, ..Default::default() }).unwrap();
        for i in 0..t.rows() {
            assert!((norm(t.row(i)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_count_rejected() {
        assert!(sample_sphere_dataset(&SphereDatasetConfig { count: 0, ..Default::default() }).is_err());
    }
}
