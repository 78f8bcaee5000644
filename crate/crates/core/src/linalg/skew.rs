use rand::Rng;
use rand_distr::StandardNormal;

use super::Tensor;
use crate::error::{check_len, Result};

const TAYLOR_ORDER: usize = 12;

/// Matrix exponential by scaling and squaring: the argument is halved until
/// its 1-norm drops below 0.5, a degree-12 Taylor polynomial is evaluated, and
/// the result is squared back up.
pub fn expm(a: &Tensor) -> Tensor {
    let n = a.rows();
    let norm = a.norm_1();
    let mut squarings = 0u32;
    while norm / 2f64.powi(squarings as i32) >= 0.5 {
        squarings += 1;
    }
    let scaled = a.scale(1.0 / 2f64.powi(squarings as i32));

    // Horner form: I + A(I + A/2(I + A/3(...)))
    let eye = Tensor::identity(n);
    let mut acc = eye.clone();
    for k in (1..=TAYLOR_ORDER).rev() {
        acc = eye.add(&scaled.matmul(&acc).expect("square").scale(1.0 / k as f64));
    }
    for _ in 0..squarings {
        acc = acc.matmul(&acc).expect("square");
    }
    acc
}

/// Special orthogonal matrix `Q = exp(A)` with `A` skew-symmetric, parameterized
/// by `A[j][i] = -A[i][j] = p` over pairs `i < j` in row-major order, so that
/// in two dimensions a positive parameter rotates counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewOrthogonal {
    dim: usize,
    params: Vec<f64>,
    q: Tensor,
}

impl SkewOrthogonal {
    pub fn new(dim: usize, params: Vec<f64>) -> Result<Self> {
        check_len("skew parameters", params.len(), dim * dim.saturating_sub(1) / 2)?;
        let mut s = Self { dim, params, q: Tensor::identity(dim) };
        s.refresh();
        Ok(s)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, vec![0.0; dim * dim.saturating_sub(1) / 2]).expect("length matches")
    }

    pub fn random<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> Self {
        let n = dim * dim.saturating_sub(1) / 2;
        let p = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        Self::new(dim, p).expect("length matches")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Overwrites the parameters and recomputes the cached exponential.
    pub fn set_params(&mut self, p: &[f64]) {
        self.params.copy_from_slice(p);
        self.refresh();
    }

    fn refresh(&mut self) {
        self.q = expm(&self.generator());
    }

    pub fn generator(&self) -> Tensor {
        let d = self.dim;
        let mut a = Tensor::zeros(vec![d, d]);
        let mut k = 0;
        for i in 0..d {
            for j in i + 1..d {
                a.set(j, i, self.params[k]);
                a.set(i, j, -self.params[k]);
                k += 1;
            }
        }
        a
    }

    pub fn matrix(&self) -> &Tensor {
        &self.q
    }

    /// Pulls a gradient with respect to `Q` (row-major `d×d`) back to the skew
    /// parameters through the adjoint Fréchet derivative of `exp`, read off the
    /// upper-right block of `exp([[Aᵀ, G], [0, Aᵀ]])`.
    pub fn matrix_grad_to_params(&self, q_grad: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let at = self.generator().transpose();
        let mut big = Tensor::zeros(vec![2 * d, 2 * d]);
        for i in 0..d {
            for j in 0..d {
                big.set(i, j, at.get(i, j));
                big.set(i + d, j + d, at.get(i, j));
                big.set(i, j + d, q_grad[i * d + j]);
            }
        }
        let e = expm(&big);
        let mut out = Vec::with_capacity(self.params.len());
        for i in 0..d {
            for j in i + 1..d {
                out.push(e.get(j, i + d) - e.get(i, j + d));
            }
        }
        out
    }
}
