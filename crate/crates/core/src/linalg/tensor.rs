use serde::{Deserialize, Serialize};

use crate::error::{CefError, Result};

/// Dense row-major float64 array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&s| s == 0) && !data.is_empty() {
            return Err(CefError::Shape(format!("zero extent in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(CefError::Shape(format!(
                "shape {shape:?} needs {n} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn identity(d: usize) -> Self {
        let mut t = Self::zeros(vec![d, d]);
        for i in 0..d {
            t.data[i * d + i] = 1.0;
        }
        t
    }

    /// Stacks equally long rows into a `[rows, cols]` matrix.
    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(CefError::Shape(format!("row of length {} in {cols}-column matrix", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let c = self.cols();
        self.data[i * c + j] = v;
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut out = Tensor::zeros(vec![c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = (self.rows(), self.cols());
        let (k2, m) = (other.rows(), other.cols());
        if k != k2 {
            return Err(CefError::Shape(format!("matmul {n}x{k} by {k2}x{m}")));
        }
        let mut out = Tensor::zeros(vec![n, m]);
        for i in 0..n {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * m..(i + 1) * m];
                for (o, b) in orow.iter_mut().zip(&other.data[l * m..(l + 1) * m]) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let c = self.cols();
        debug_assert_eq!(c, v.len());
        (0..self.rows()).map(|i| super::dot(&self.data[i * c..(i + 1) * c], v)).collect()
    }

    /// `selfᵀ v`
    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        let c = self.cols();
        let mut out = vec![0.0; c];
        for (i, vi) in v.iter().enumerate() {
            super::axpy(*vi, &self.data[i * c..(i + 1) * c], &mut out);
        }
        out
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Tensor { shape: self.shape.clone(), data }
    }

    pub fn scale(&self, s: f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        super::norm(&self.data)
    }

    /// Max absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let (r, c) = (self.rows(), self.cols());
        (0..c)
            .map(|j| (0..r).map(|i| self.data[i * c + j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// ‖selfᵀself − I‖_F
    pub fn orthogonality_defect(&self) -> f64 {
        let g = self.transpose().matmul(self).expect("square");
        g.add(&Tensor::identity(self.cols()).scale(-1.0)).frobenius_norm()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
