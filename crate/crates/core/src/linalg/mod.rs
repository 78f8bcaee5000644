//! Dense linear algebra, orthogonal parameterizations and finite differences.

mod fd;
mod householder;
mod orthogonal;
mod plu;
mod skew;
mod tensor;

pub use fd::{fd_jacobian, DEFAULT_FD_STEP};
pub use householder::{HouseholderStack, EPSILON_HH};
pub use orthogonal::OrthoParam;
pub use plu::{plu_logdet, PluMatrix};
pub use skew::{expm, SkewOrthogonal};
pub use tensor::Tensor;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Log-magnitude of a determinant by Gaussian elimination with partial pivoting.
/// Returns `-inf` for singular input.
pub fn dense_log_abs_det(m: &Tensor) -> f64 {
    let n = m.rows();
    let mut a = m.data().to_vec();
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        let p = a[piv * n + col];
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        if piv != col {
            for j in 0..n {
                a.swap(piv * n + j, col * n + j);
            }
        }
        acc += p.abs().ln();
        for i in col + 1..n {
            let f = a[i * n + col] / p;
            for j in col..n {
                a[i * n + j] -= f * a[col * n + j];
            }
        }
    }
    acc
}
