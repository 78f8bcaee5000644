use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Tensor;
use crate::error::{check_len, CefError, Result};

/// Invertible matrix `W = P·L·U` with unit-lower `L` and `U = diag(sign·exp(log_diag)) + strict upper`.
///
/// The permutation and diagonal signs are fixed buffers; the trainable
/// parameters are `[lower strict (row-major), upper strict (row-major), log_diag]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PluMatrix {
    dim: usize,
    /// Row `i` of `W` is row `perm[i]` of `L·U`.
    perm: Vec<usize>,
    signs: Vec<f64>,
    params: Vec<f64>,
}

impl PluMatrix {
    pub fn tri_len(dim: usize) -> usize {
        dim * dim.saturating_sub(1) / 2
    }

    pub fn param_len(dim: usize) -> usize {
        2 * Self::tri_len(dim) + dim
    }

    pub fn new(dim: usize, perm: Vec<usize>, signs: Vec<f64>, params: Vec<f64>) -> Result<Self> {
        check_len("PLU permutation", perm.len(), dim)?;
        check_len("PLU signs", signs.len(), dim)?;
        check_len("PLU parameters", params.len(), Self::param_len(dim))?;
        let mut seen = vec![false; dim];
        for &p in &perm {
            if p >= dim || std::mem::replace(&mut seen[p], true) {
                return Err(CefError::Shape(format!("{perm:?} is not a permutation")));
            }
        }
        if signs.iter().any(|s| s.abs() != 1.0) {
            return Err(CefError::Shape("PLU signs must be ±1".into()));
        }
        Ok(Self { dim, perm, signs, params })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            perm: (0..dim).collect(),
            signs: vec![1.0; dim],
            params: vec![0.0; Self::param_len(dim)],
        }
    }

    /// Random permutation and signs with triangular entries and log-diagonal
    /// drawn from `N(0, scale²)`.
    pub fn random<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..dim).collect();
        perm.shuffle(rng);
        let signs = (0..dim).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let params =
            (0..Self::param_len(dim)).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        Self { dim, perm, signs, params }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn log_diag(&self) -> &[f64] {
        &self.params[2 * Self::tri_len(self.dim)..]
    }

    pub fn lower(&self) -> Tensor {
        let d = self.dim;
        let mut l = Tensor::identity(d);
        let mut k = 0;
        for i in 0..d {
            for j in 0..i {
                l.set(i, j, self.params[k]);
                k += 1;
            }
        }
        l
    }

    pub fn upper(&self) -> Tensor {
        let d = self.dim;
        let mut u = Tensor::zeros(vec![d, d]);
        let mut k = Self::tri_len(d);
        for i in 0..d {
            u.set(i, i, self.signs[i] * self.log_diag()[i].exp());
            for j in i + 1..d {
                u.set(i, j, self.params[k]);
                k += 1;
            }
        }
        u
    }

    pub fn matrix(&self) -> Tensor {
        let lu = self.lower().matmul(&self.upper()).expect("square");
        let d = self.dim;
        let mut w = Tensor::zeros(vec![d, d]);
        for i in 0..d {
            for j in 0..d {
                w.set(i, j, lu.get(self.perm[i], j));
            }
        }
        w
    }

    /// `log|det W|` in O(d).
    pub fn logdet(&self) -> f64 {
        self.log_diag().iter().sum()
    }

    /// `W⁻¹y` by a forward and a backward triangular solve.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let (l, u) = (self.lower(), self.upper());
        // Pᵀy
        let mut b = vec![0.0; d];
        for i in 0..d {
            b[self.perm[i]] = y[i];
        }
        for i in 0..d {
            for j in 0..i {
                b[i] -= l.get(i, j) * b[j];
            }
        }
        for i in (0..d).rev() {
            for j in i + 1..d {
                b[i] -= u.get(i, j) * b[j];
            }
            b[i] /= u.get(i, i);
        }
        b
    }

    /// `W⁻ᵀx`
    pub fn solve_transpose(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let (l, u) = (self.lower(), self.upper());
        // Wᵀ = UᵀLᵀPᵀ: solve Uᵀa = x, then Lᵀb = a, then apply P.
        let mut a = x.to_vec();
        for i in 0..d {
            for j in 0..i {
                a[i] -= u.get(j, i) * a[j];
            }
            a[i] /= u.get(i, i);
        }
        for i in (0..d).rev() {
            for j in i + 1..d {
                a[i] -= l.get(j, i) * a[j];
            }
        }
        (0..d).map(|i| a[self.perm[i]]).collect()
    }

    /// Pulls a gradient with respect to the dense `W` back to the parameters.
    pub fn matrix_grad_to_params(&self, w_grad: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut m_grad = Tensor::zeros(vec![d, d]);
        for i in 0..d {
            for j in 0..d {
                m_grad.set(self.perm[i], j, w_grad[i * d + j]);
            }
        }
        let (l, u) = (self.lower(), self.upper());
        let l_grad = m_grad.matmul(&u.transpose()).expect("square");
        let u_grad = l.transpose().matmul(&m_grad).expect("square");
        let mut out = Vec::with_capacity(Self::param_len(d));
        for i in 0..d {
            for j in 0..i {
                out.push(l_grad.get(i, j));
            }
        }
        for i in 0..d {
            for j in i + 1..d {
                out.push(u_grad.get(i, j));
            }
        }
        for i in 0..d {
            out.push(u_grad.get(i, i) * u.get(i, i));
        }
        out
    }
}

/// Log-magnitude of the determinant of the PLU-parameterized matrix.
pub fn plu_logdet(w: &PluMatrix) -> f64 {
    w.logdet()
}
