use super::BijectiveBlock;
use crate::error::{check_len, Result};
use crate::linalg::{axpy, PluMatrix};

/// Invertible 1×1 convolution: the same PLU matrix mixes the channels at every
/// spatial position.
///
/// Raw gradient layout: `[∂W (c×c, row-major), direct ∂log_diag (c)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvConv1x1 {
    pub weight: PluMatrix,
    pub spatial: usize,
}

impl InvConv1x1 {
    pub fn new(weight: PluMatrix, spatial: usize) -> Self {
        Self { weight, spatial }
    }

    fn channels(&self) -> usize {
        self.weight.dim()
    }

    fn column(&self, v: &[f64], p: usize) -> Vec<f64> {
        (0..self.channels()).map(|c| v[c * self.spatial + p]).collect()
    }

    fn put_column(&self, col: &[f64], p: usize, out: &mut [f64]) {
        for (c, val) in col.iter().enumerate() {
            out[c * self.spatial + p] = *val;
        }
    }

    fn log_det(&self) -> f64 {
        self.spatial as f64 * self.weight.logdet()
    }

    fn add_logdet_grad(&self, dld: f64, raw: &mut [f64]) {
        let c = self.channels();
        for g in &mut raw[c * c..] {
            *g += self.spatial as f64 * dld;
        }
    }
}

impl BijectiveBlock for InvConv1x1 {
    fn dim(&self) -> usize {
        self.channels() * self.spatial
    }
    fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_len("1x1 conv input", z.len(), self.dim())?;
        let w = self.weight.matrix();
        let mut y = vec![0.0; z.len()];
        for p in 0..self.spatial {
            self.put_column(&w.matvec(&self.column(z, p)), p, &mut y);
        }
        Ok((y, self.log_det()))
    }
    fn inverse(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_len("1x1 conv input", y.len(), self.dim())?;
        let mut z = vec![0.0; y.len()];
        for p in 0..self.spatial {
            self.put_column(&self.weight.solve(&self.column(y, p)), p, &mut z);
        }
        Ok((z, self.log_det()))
    }
    fn params(&self) -> Vec<f64> {
        self.weight.params().to_vec()
    }
    fn set_params(&mut self, p: &[f64]) {
        self.weight.params_mut().copy_from_slice(p);
    }
    fn raw_grad_len(&self) -> usize {
        let c = self.channels();
        c * c + c
    }
    fn reduce_grad(&self, raw: &[f64]) -> Vec<f64> {
        let c = self.channels();
        let mut g = self.weight.matrix_grad_to_params(&raw[..c * c]);
        let n = g.len();
        axpy(1.0, &raw[c * c..], &mut g[n - c..]);
        g
    }
    fn forward_vjp(&self, z: &[f64], dy: &[f64], dld: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        let c = self.channels();
        let w = self.weight.matrix();
        let mut dz = vec![0.0; z.len()];
        for p in 0..self.spatial {
            let zc = self.column(z, p);
            let dyc = self.column(dy, p);
            for i in 0..c {
                axpy(dyc[i], &zc, &mut raw[i * c..(i + 1) * c]);
            }
            self.put_column(&w.matvec_t(&dyc), p, &mut dz);
        }
        self.add_logdet_grad(dld, raw);
        Ok(dz)
    }
    fn inverse_vjp(&self, y: &[f64], dz: &[f64], dld: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        let c = self.channels();
        let mut dy = vec![0.0; y.len()];
        for p in 0..self.spatial {
            let zc = self.weight.solve(&self.column(y, p));
            let dyc = self.weight.solve_transpose(&self.column(dz, p));
            // z = W⁻¹y  ⇒  ∂W = −W⁻ᵀ dz zᵀ
            for i in 0..c {
                axpy(-dyc[i], &zc, &mut raw[i * c..(i + 1) * c]);
            }
            self.put_column(&dyc, p, &mut dy);
        }
        self.add_logdet_grad(dld, raw);
        Ok(dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weight() {
        let b = InvConv1x1::new(PluMatrix::identity(3), 1);
        let (y, ld) = b.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn roundtrip_with_spatial_extent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = InvConv1x1::new(PluMatrix::random(3, 0.4, &mut rng), 4);
        let z: Vec<f64> = (0..12).map(|i| (i as f64 * 0.9).sin()).collect();
        let (y, ld) = b.forward(&z).unwrap();
        let (back, ld2) = b.inverse(&y).unwrap();
        assert!(max_abs_diff(&back, &z) < 1e-10);
        assert_eq!(ld, ld2);
        assert!((ld - 4.0 * b.weight.logdet()).abs() < 1e-15);
    }
}
