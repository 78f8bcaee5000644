//! The composed model `x = g(h(z))` and its exact density on the range of `g`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bijective::{stack_forward, stack_inverse, ActNorm, BijectiveBlock, BijectiveLayer};
use crate::conformal::{compose_forward, compose_left_inverse, ConformalBlock, ConformalLayer};
use crate::error::{check_finite, check_len, CefError, Result};
use crate::linalg::{norm_sq, sub, Tensor};
use crate::par::{map_indexed, ExecPolicy};

/// Attempts per sample before giving up on singular draws.
pub const MAX_RESAMPLE: usize = 16;

/// `log N(z; 0, I)`
pub fn standard_normal_log_density(z: &[f64]) -> f64 {
    -0.5 * norm_sq(z) - 0.5 * z.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Decomposition of `log p(x) = log p(z) − log|det J_h(z)| − m·log λ(u)`,
/// evaluated at the projection of `x` onto the model manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport {
    pub log_prob: f64,
    pub log_base: f64,
    pub logdet_h: f64,
    /// `m·Σᵢ log λᵢ`
    pub log_conformal: f64,
    /// `‖x − g(g†(x))‖²`
    pub reconstruction_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CefModel {
    latent_dim: usize,
    pub g: Vec<ConformalLayer>,
    pub h: Vec<BijectiveLayer>,
}

impl CefModel {
    /// Checks that block dimensions chain `m → … → n` and that every stump
    /// block has dimension `m`.
    pub fn new(latent_dim: usize, g: Vec<ConformalLayer>, h: Vec<BijectiveLayer>) -> Result<Self> {
        if latent_dim == 0 {
            return Err(CefError::Shape("latent dimension must be positive".into()));
        }
        for (i, b) in h.iter().enumerate() {
            if b.dim() != latent_dim {
                return Err(CefError::Shape(format!(
                    "stump block {i} ({}) has dim {}, latent dim is {latent_dim}",
                    b.name(),
                    b.dim()
                )));
            }
        }
        let mut cur = latent_dim;
        for (i, b) in g.iter().enumerate() {
            if b.in_dim() != cur {
                return Err(CefError::Shape(format!(
                    "embedding block {i} ({}) expects input dim {}, previous output is {cur}",
                    b.name(),
                    b.in_dim()
                )));
            }
            cur = b.out_dim();
        }
        Ok(Self { latent_dim, g, h })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.g.last().map_or(self.latent_dim, |b| b.out_dim())
    }

    /// `x = g(h(z))`
    pub fn generate(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("latent sample", z.len(), self.latent_dim)?;
        let (u, _) = stack_forward(&self.h, z)?;
        let x = compose_forward(&self.g, &u)?;
        check_finite("generation", &x)?;
        Ok(x)
    }

    /// `(u, x_proj) = (g†(x), g(g†(x)))`
    pub fn project(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("data point", x.len(), self.ambient_dim())?;
        check_finite("projection input", x)?;
        let u = compose_left_inverse(&self.g, x)?;
        let xp = compose_forward(&self.g, &u)?;
        Ok((u, xp))
    }

    pub fn log_prob(&self, x: &[f64]) -> Result<DensityReport> {
        let (u, xp) = self.project(x)?;
        let m = self.latent_dim as f64;
        let mut log_lambda = 0.0;
        let mut cur = u.clone();
        for b in &self.g {
            log_lambda += b.log_conformal_factor(&cur)?;
            cur = b.forward(&cur)?;
        }
        let (z, logdet_h) = stack_inverse(&self.h, &u)?;
        let log_base = standard_normal_log_density(&z);
        let log_conformal = m * log_lambda;
        let report = DensityReport {
            log_prob: log_base - logdet_h - log_conformal,
            log_base,
            logdet_h,
            log_conformal,
            reconstruction_sq: norm_sq(&sub(x, &xp)),
        };
        if !report.log_prob.is_finite() {
            return Err(CefError::Numeric("log density is not finite".into()));
        }
        Ok(report)
    }

    /// Batch version of [`CefModel::log_prob`]; failures are reported per row.
    pub fn log_prob_batch(&self, xs: &Tensor, policy: ExecPolicy) -> Vec<Result<DensityReport>> {
        if xs.is_empty() {
            return Vec::new();
        }
        map_indexed(policy, xs.rows(), |i| self.log_prob(xs.row(i)))
    }

    pub fn g_params(&self) -> Vec<f64> {
        self.g.iter().flat_map(|b| b.params()).collect()
    }

    pub fn h_params(&self) -> Vec<f64> {
        self.h.iter().flat_map(|b| b.params()).collect()
    }

    pub fn set_g_params(&mut self, p: &[f64]) -> Result<()> {
        check_len("embedding parameters", p.len(), self.g.iter().map(|b| b.num_params()).sum())?;
        let mut off = 0;
        for b in &mut self.g {
            let n = b.num_params();
            b.set_params(&p[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn set_h_params(&mut self, p: &[f64]) -> Result<()> {
        check_len("stump parameters", p.len(), self.h.iter().map(|b| b.num_params()).sum())?;
        let mut off = 0;
        for b in &mut self.h {
            let n = b.num_params();
            b.set_params(&p[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn has_uninitialized_actnorm(&self) -> bool {
        self.h.iter().any(|b| matches!(b, BijectiveLayer::ActNorm(a) if !a.initialized))
    }

    /// Data-dependent initialization of every uninitialized ActNorm, walking
    /// the stump in the normalizing direction from the projected batch.
    pub fn initialize_actnorm(&mut self, xs: &[Vec<f64>]) -> Result<()> {
        let mut cur: Vec<Vec<f64>> = xs.iter().map(|x| self.project(x).map(|p| p.0)).collect::<Result<_>>()?;
        for b in self.h.iter_mut().rev() {
            if let BijectiveLayer::ActNorm(a) = b {
                if !a.initialized {
                    a.initialize(&cur)?;
                }
            }
            cur = cur.iter().map(|y| b.inverse(y).map(|r| r.0)).collect::<Result<_>>()?;
        }
        Ok(())
    }

    /// Marks every ActNorm initialized with its current parameters.
    pub fn mark_actnorm_initialized(&mut self) {
        for b in &mut self.h {
            if let BijectiveLayer::ActNorm(ActNorm { initialized, .. }) = b {
                *initialized = true;
            }
        }
    }
}

/// Draws `count` samples `g(h(z))`, `z ~ N(0, I)`. Sample `i` uses its own
/// ChaCha stream, so output is identical for any execution policy. Draws that
/// hit a singular guard are redrawn up to [`MAX_RESAMPLE`] times.
pub fn sample(model: &CefModel, count: usize, seed: u64, policy: ExecPolicy) -> Result<Tensor> {
    let m = model.latent_dim();
    let rows = map_indexed(policy, count, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut last = None;
        for _ in 0..MAX_RESAMPLE {
            let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            match model.generate(&z) {
                Ok(x) => return Ok(x),
                Err(e @ (CefError::Singularity(_) | CefError::Numeric(_))) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or_else(|| CefError::Numeric("sampling failed".into())))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(Tensor::zeros(vec![0, model.ambient_dim()]));
    }
    Tensor::from_rows(&rows, model.ambient_dim())
}

/// Standard change of variables for a square flow (no embedding).
pub fn full_change_of_variables(model: &CefModel, x: &[f64]) -> Result<f64> {
    if !model.g.is_empty() {
        return Err(CefError::Shape("full change of variables needs a model without embedding blocks".into()));
    }
    check_len("data point", x.len(), model.latent_dim())?;
    let (z, logdet) = stack_inverse(&model.h, x)?;
    Ok(standard_normal_log_density(&z) - logdet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{Padding, Scaling};

    fn padded(m: usize, n: usize) -> CefModel {
        CefModel::new(m, vec![Padding::new(m, n).unwrap().into()], vec![]).unwrap()
    }

    #[test]
    fn dims_must_chain() {
        let r = CefModel::new(2, vec![Padding::new(3, 4).unwrap().into()], vec![]);
        assert!(matches!(r, Err(CefError::Shape(_))));
        let r = CefModel::new(2, vec![], vec![ActNorm::identity(3, 1).into()]);
        assert!(r.is_err());
    }

    #[test]
    fn padding_projection_drops_coordinates() {
        let m = padded(2, 3);
        let (u, xp) = m.project(&[1.0, 2.0, 7.0]).unwrap();
        assert_eq!(u, vec![1.0, 2.0]);
        assert_eq!(xp, vec![1.0, 2.0, 0.0]);
        let r = m.log_prob(&[1.0, 2.0, 7.0]).unwrap();
        assert_eq!(r.reconstruction_sq, 49.0);
        assert!(r.log_prob.is_finite());
    }

    #[test]
    fn on_plane_density_is_gaussian() {
        let m = padded(2, 3);
        let r = m.log_prob(&[0.5, -1.0, 0.0]).unwrap();
        assert!((r.log_prob - standard_normal_log_density(&[0.5, -1.0])).abs() < 1e-15);
    }

    #[test]
    fn constant_scaling_shifts_log_prob() {
        let s = 0.7;
        let plain = padded(2, 3);
        let scaled = CefModel::new(
            2,
            vec![Scaling::new(2, s).into(), Padding::new(2, 3).unwrap().into()],
            vec![],
        )
        .unwrap();
        let u = [0.3, -0.4];
        let a = plain.log_prob(&[u[0], u[1], 0.0]).unwrap().log_prob;
        let x = scaled.generate(&u).unwrap();
        let b = scaled.log_prob(&x).unwrap().log_prob;
        assert!((b - (a - 2.0 * s)).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let m = padded(2, 3);
        let a = sample(&m, 64, 9, ExecPolicy::Parallel).unwrap();
        let b = sample(&m, 64, 9, ExecPolicy::Sequential).unwrap();
        assert_eq!(a, b);
        let c = sample(&m, 64, 10, ExecPolicy::Sequential).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn square_flow_requires_no_embedding() {
        assert!(full_change_of_variables(&padded(2, 3), &[0.0, 0.0]).is_err());
        let id = CefModel::new(2, vec![], vec![]).unwrap();
        let lp = full_change_of_variables(&id, &[0.1, 0.2]).unwrap();
        assert_eq!(lp, standard_normal_log_density(&[0.1, 0.2]));
    }
}
