use super::BijectiveBlock;
use crate::error::{check_len, CefError, Result};

/// Per-channel affine map `y = z·exp(log_scale) + bias`, broadcast over a
/// spatial extent. Channel-major layout: entry `c·spatial + p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActNorm {
    pub channels: usize,
    pub spatial: usize,
    pub log_scale: Vec<f64>,
    pub bias: Vec<f64>,
    pub initialized: bool,
}

impl ActNorm {
    /// Uninitialized; call [`ActNorm::initialize`] on the first batch.
    pub fn new(channels: usize, spatial: usize) -> Self {
        Self {
            channels,
            spatial,
            log_scale: vec![0.0; channels],
            bias: vec![0.0; channels],
            initialized: false,
        }
    }

    pub fn identity(channels: usize, spatial: usize) -> Self {
        Self { initialized: true, ..Self::new(channels, spatial) }
    }

    /// Data-dependent init: afterwards the inverse maps `batch` to zero mean and
    /// unit variance per channel. `batch` holds `y`-side points.
    pub fn initialize(&mut self, batch: &[Vec<f64>]) -> Result<()> {
        if batch.is_empty() {
            return Err(CefError::State("ActNorm initialization needs a non-empty batch".into()));
        }
        let s = self.spatial;
        let n = (batch.len() * s) as f64;
        for c in 0..self.channels {
            let vals = || batch.iter().flat_map(|y| &y[c * s..(c + 1) * s]);
            let mean = vals().sum::<f64>() / n;
            let var = vals().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            self.bias[c] = mean;
            self.log_scale[c] = 0.5 * var.max(1e-24).ln();
        }
        self.initialized = true;
        Ok(())
    }

    fn ready(&self, v: &[f64]) -> Result<()> {
        if !self.initialized {
            return Err(CefError::State("ActNorm used before data-dependent initialization".into()));
        }
        check_len("ActNorm input", v.len(), self.channels * self.spatial)
    }

    fn log_det(&self) -> f64 {
        self.spatial as f64 * self.log_scale.iter().sum::<f64>()
    }
}

impl BijectiveBlock for ActNorm {
    fn dim(&self) -> usize {
        self.channels * self.spatial
    }
    fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.ready(z)?;
        let s = self.spatial;
        let y = z.iter().enumerate().map(|(i, v)| v * self.log_scale[i / s].exp() + self.bias[i / s]).collect();
        Ok((y, self.log_det()))
    }
    fn inverse(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.ready(y)?;
        let s = self.spatial;
        let z = y.iter().enumerate().map(|(i, v)| (v - self.bias[i / s]) * (-self.log_scale[i / s]).exp()).collect();
        Ok((z, self.log_det()))
    }
    fn params(&self) -> Vec<f64> {
        let mut p = self.log_scale.clone();
        p.extend_from_slice(&self.bias);
        p
    }
    fn set_params(&mut self, p: &[f64]) {
        let (a, b) = p.split_at(self.channels);
        self.log_scale.copy_from_slice(a);
        self.bias.copy_from_slice(b);
    }
    fn forward_vjp(&self, z: &[f64], dy: &[f64], dld: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        self.ready(z)?;
        let (c, s) = (self.channels, self.spatial);
        let mut dz = vec![0.0; z.len()];
        for ch in 0..c {
            let e = self.log_scale[ch].exp();
            raw[ch] += s as f64 * dld;
            for i in ch * s..(ch + 1) * s {
                dz[i] = dy[i] * e;
                raw[ch] += dy[i] * z[i] * e;
                raw[c + ch] += dy[i];
            }
        }
        Ok(dz)
    }
    fn inverse_vjp(&self, y: &[f64], dz: &[f64], dld: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        self.ready(y)?;
        let (c, s) = (self.channels, self.spatial);
        let mut dy = vec![0.0; y.len()];
        for ch in 0..c {
            let e = (-self.log_scale[ch]).exp();
            raw[ch] += s as f64 * dld;
            for i in ch * s..(ch + 1) * s {
                let z = (y[i] - self.bias[ch]) * e;
                dy[i] = dz[i] * e;
                raw[ch] -= dz[i] * z;
                raw[c + ch] -= dz[i] * e;
            }
        }
        Ok(dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_params() {
        let a = ActNorm::identity(3, 1);
        let (y, ld) = a.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(y, vec![1.0, -2.0, 0.5]);
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn uninitialized_is_state_error() {
        let a = ActNorm::new(2, 1);
        assert!(matches!(a.forward(&[0.0, 0.0]), Err(CefError::State(_))));
    }

    #[test]
    fn init_standardizes_batch() {
        let batch: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = i as f64;
                vec![3.0 + (t * 0.7).sin() * 2.0, -1.0 + (t * 1.3).cos() * 0.1]
            })
            .collect();
        let mut a = ActNorm::new(2, 1);
        a.initialize(&batch).unwrap();
        let zs: Vec<Vec<f64>> = batch.iter().map(|y| a.inverse(y).unwrap().0).collect();
        for c in 0..2 {
            let mean = zs.iter().map(|z| z[c]).sum::<f64>() / 50.0;
            let var = zs.iter().map(|z| (z[c] - mean).powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-6 && (var - 1.0).abs() < 1e-6);
        }
    }
}
