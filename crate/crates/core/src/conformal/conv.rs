use super::ConformalBlock;
use crate::error::{check_len, CefError, Result};
use crate::linalg::OrthoParam;

/// Stride-`k` `k×k` convolution whose `(k²c)×(k²c)` filter matrix is
/// orthogonal. Input is `(c, h, w)`, output `(k²c, h/k, w/k)`, both flattened
/// row-major. Within a patch vector the index is `channel·k² + row·k + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoConv {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub filter: OrthoParam,
}

impl OrthoConv {
    pub fn new(channels: usize, height: usize, width: usize, kernel: usize, filter: OrthoParam) -> Result<Self> {
        if kernel == 0 || height % kernel != 0 || width % kernel != 0 {
            return Err(CefError::Shape(format!(
                "{height}x{width} image does not tile into {kernel}x{kernel} patches"
            )));
        }
        check_len("orthogonal conv filter", filter.dim(), kernel * kernel * channels)?;
        Ok(Self { channels, height, width, kernel, filter })
    }

    fn dim(&self) -> usize {
        self.channels * self.height * self.width
    }

    fn patches(&self) -> (usize, usize) {
        (self.height / self.kernel, self.width / self.kernel)
    }

    fn gather(&self, x: &[f64], pi: usize, pj: usize) -> Vec<f64> {
        let k = self.kernel;
        let mut p = Vec::with_capacity(k * k * self.channels);
        for c in 0..self.channels {
            for di in 0..k {
                let row = (c * self.height + pi * k + di) * self.width + pj * k;
                p.extend_from_slice(&x[row..row + k]);
            }
        }
        p
    }

    fn scatter(&self, p: &[f64], pi: usize, pj: usize, x: &mut [f64]) {
        let k = self.kernel;
        for c in 0..self.channels {
            for di in 0..k {
                let row = (c * self.height + pi * k + di) * self.width + pj * k;
                x[row..row + k].copy_from_slice(&p[(c * k + di) * k..(c * k + di + 1) * k]);
            }
        }
    }

    fn read_out(&self, y: &[f64], pi: usize, pj: usize) -> Vec<f64> {
        let (ph, pw) = self.patches();
        let n = self.filter.dim();
        (0..n).map(|o| y[(o * ph + pi) * pw + pj]).collect()
    }

    fn write_out(&self, v: &[f64], pi: usize, pj: usize, y: &mut [f64]) {
        let (ph, pw) = self.patches();
        for (o, val) in v.iter().enumerate() {
            y[(o * ph + pi) * pw + pj] = *val;
        }
    }
}

pub fn ortho_conv_fwd(x: &[f64], conv: &OrthoConv) -> Result<Vec<f64>> {
    check_len("orthogonal conv input", x.len(), conv.dim())?;
    let (ph, pw) = conv.patches();
    let mut y = vec![0.0; x.len()];
    for pi in 0..ph {
        for pj in 0..pw {
            let v = conv.filter.apply(&conv.gather(x, pi, pj))?;
            conv.write_out(&v, pi, pj, &mut y);
        }
    }
    Ok(y)
}

/// Transposed convolution with the same filter.
pub fn ortho_conv_inv(y: &[f64], conv: &OrthoConv) -> Result<Vec<f64>> {
    check_len("orthogonal conv output", y.len(), conv.dim())?;
    let (ph, pw) = conv.patches();
    let mut x = vec![0.0; y.len()];
    for pi in 0..ph {
        for pj in 0..pw {
            let p = conv.filter.apply_transpose(&conv.read_out(y, pi, pj))?;
            conv.scatter(&p, pi, pj, &mut x);
        }
    }
    Ok(x)
}

impl ConformalBlock for OrthoConv {
    fn in_dim(&self) -> usize {
        self.dim()
    }
    fn out_dim(&self) -> usize {
        self.dim()
    }
    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        ortho_conv_fwd(u, self)
    }
    fn left_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        ortho_conv_inv(x, self)
    }
    fn log_conformal_factor(&self, _u: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
    fn params(&self) -> Vec<f64> {
        self.filter.params().to_vec()
    }
    fn set_params(&mut self, p: &[f64]) {
        self.filter.set_params(p);
    }
    fn raw_grad_len(&self) -> usize {
        self.filter.raw_grad_len()
    }
    fn reduce_grad(&self, raw: &[f64]) -> Vec<f64> {
        self.filter.reduce_grad(raw)
    }
    fn vjp(&self, u: &[f64], dy: &[f64], _dl: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        let (ph, pw) = self.patches();
        let mut du = vec![0.0; u.len()];
        for pi in 0..ph {
            for pj in 0..pw {
                let dp = self.filter.vjp_apply(&self.gather(u, pi, pj), &self.read_out(dy, pi, pj), raw);
                self.scatter(&dp, pi, pj, &mut du);
            }
        }
        Ok(du)
    }
    fn left_inverse_vjp(&self, x: &[f64], du: &[f64], raw: &mut [f64]) -> Result<Vec<f64>> {
        let (ph, pw) = self.patches();
        let mut dx = vec![0.0; x.len()];
        for pi in 0..ph {
            for pj in 0..pw {
                let dv = self.filter.vjp_apply_transpose(
                    &self.read_out(x, pi, pj),
                    &self.gather(du, pi, pj),
                    raw,
                );
                self.write_out(&dv, pi, pj, &mut dx);
            }
        }
        Ok(dx)
    }
}
