use rand::Rng;
use rand_distr::StandardNormal;

use super::{dot, Tensor};
use crate::error::{check_len, Result};

/// Reflection vectors shorter than this act as the identity.
pub const EPSILON_HH: f64 = 1e-8;

/// Product of Householder reflections `Q = H_k ⋯ H_1`, stored as the `k`
/// unnormalized reflection vectors laid end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholderStack {
    dim: usize,
    vectors: Vec<f64>,
}

fn reflect(w: &[f64], v: &mut [f64]) {
    let s = dot(w, w);
    if s.sqrt() < EPSILON_HH {
        return;
    }
    let c = 2.0 * dot(w, v) / s;
    for (vi, wi) in v.iter_mut().zip(w) {
        *vi -= c * wi;
    }
}

/// Reverse-mode step through `y = H(w) v`: overwrites `cot` (dy) with dv and
/// accumulates dw.
fn reflect_vjp(w: &[f64], v: &[f64], cot: &mut [f64], w_grad: &mut [f64]) {
    let s = dot(w, w);
    if s.sqrt() < EPSILON_HH {
        return;
    }
    let a = dot(w, v);
    let cw = dot(cot, w);
    for i in 0..w.len() {
        w_grad[i] -= 2.0 * (cot[i] * a / s + cw * v[i] / s - 2.0 * cw * a * w[i] / (s * s));
    }
    reflect(w, cot);
}

impl HouseholderStack {
    pub fn new(dim: usize, vectors: Vec<f64>) -> Result<Self> {
        if dim == 0 || vectors.len() % dim != 0 {
            return Err(crate::CefError::Shape(format!(
                "{} reflection entries do not split into vectors of dimension {dim}",
                vectors.len()
            )));
        }
        Ok(Self { dim, vectors })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, vectors: Vec::new() }
    }

    pub fn random<R: Rng + ?Sized>(dim: usize, count: usize, rng: &mut R) -> Self {
        let vectors = (0..dim * count).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Self { dim, vectors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.vectors
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.vectors
    }

    fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// `Qv` in O(kd).
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("householder input", v.len(), self.dim)?;
        let mut out = v.to_vec();
        for i in 0..self.count() {
            reflect(self.vector(i), &mut out);
        }
        Ok(out)
    }

    /// `Qᵀv`
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("householder input", v.len(), self.dim)?;
        let mut out = v.to_vec();
        for i in (0..self.count()).rev() {
            reflect(self.vector(i), &mut out);
        }
        Ok(out)
    }

    pub fn matrix(&self) -> Tensor {
        let d = self.dim;
        let mut cols = Vec::with_capacity(d);
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            cols.push(self.apply(&e).expect("dims match"));
        }
        Tensor::from_rows(&cols, d).expect("square").transpose()
    }

    /// Given `y = Qv` and cotangent `dy`, returns `dv` and accumulates the
    /// gradient of the reflection vectors into `grad`.
    pub fn vjp_apply(&self, v: &[f64], dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let d = self.dim;
        let k = self.count();
        let mut inputs = Vec::with_capacity(k);
        let mut cur = v.to_vec();
        for i in 0..k {
            inputs.push(cur.clone());
            reflect(self.vector(i), &mut cur);
        }
        let mut cot = dy.to_vec();
        for i in (0..k).rev() {
            reflect_vjp(self.vector(i), &inputs[i], &mut cot, &mut grad[i * d..(i + 1) * d]);
        }
        cot
    }

    /// Given `x = Qᵀy` and cotangent `dx`, returns `dy` and accumulates `grad`.
    pub fn vjp_apply_transpose(&self, y: &[f64], dx: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let d = self.dim;
        let k = self.count();
        let mut inputs = vec![Vec::new(); k];
        let mut cur = y.to_vec();
        for i in (0..k).rev() {
            inputs[i] = cur.clone();
            reflect(self.vector(i), &mut cur);
        }
        let mut cot = dx.to_vec();
        for i in 0..k {
            reflect_vjp(self.vector(i), &inputs[i], &mut cot, &mut grad[i * d..(i + 1) * d]);
        }
        cot
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_stack_is_identity() {
        let h = HouseholderStack::identity(3);
        assert_eq!(h.apply(&[1.0, -2.0, 0.5]).unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn single_reflection_through_e1() {
        let h = HouseholderStack::new(3, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(h.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn roundtrip_with_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = HouseholderStack::random(6, 4, &mut rng);
        let v: Vec<f64> = (0..6).map(|i| (i as f64).cos()).collect();
        let back = h.apply_transpose(&h.apply(&v).unwrap()).unwrap();
        assert!(super::super::max_abs_diff(&back, &v) < 1e-12);
        assert!(h.matrix().orthogonality_defect() < 1e-10);
    }

    #[test]
    fn tiny_vector_is_skipped() {
        let h = HouseholderStack::new(2, vec![1e-9, 0.0]).unwrap();
        assert_eq!(h.apply(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let mut g = vec![0.0; 2];
        let dv = h.vjp_apply(&[1.0, 2.0], &[0.3, 0.4], &mut g);
        assert_eq!(dv, vec![0.3, 0.4]);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let h = HouseholderStack::identity(3);
        assert!(h.apply(&[1.0]).is_err());
    }
}
