use rand::Rng;

use super::{BijectiveBlock, Mlp};
use crate::error::{check_len, CefError, Result};

/// Bound on the coupling log-scale: `s = S_MAX·tanh(raw / S_MAX)`.
pub const S_MAX: f64 = 5.0;

/// Affine coupling over an even/odd split. Coordinates with index parity equal
/// to `parity` condition the network; the others are scaled and shifted:
/// `y_A = z_A ⊙ exp(s(z_C)) + t(z_C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCoupling {
    pub dim: usize,
    pub parity: usize,
    pub net: Mlp,
}

struct Split {
    cond: Vec<usize>,
    active: Vec<usize>,
}

impl AffineCoupling {
    pub fn new<R: Rng + ?Sized>(dim: usize, parity: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        if dim < 2 {
            return Err(CefError::Shape(format!("affine coupling needs dim ≥ 2, got {dim}")));
        }
        let mut c = Self { dim, parity: parity % 2, net: Mlp { inputs: 0, hidden, outputs: 0, params: vec![] } };
        let sp = c.split();
        c.net = Mlp::new(sp.cond.len(), hidden, 2 * sp.active.len(), rng);
        Ok(c)
    }

    fn split(&self) -> Split {
        let (cond, active) = (0..self.dim).partition(|i| i % 2 == self.parity);
        Split { cond, active }
    }

    /// Indices transformed by this coupling.
    pub fn active_indices(&self) -> Vec<usize> {
        self.split().active
    }

    fn scale_shift(&self, zc: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, super::mlp::MlpTrace) {
        let (out, trace) = self.net.forward(zc);
        let na = out.len() / 2;
        let s: Vec<f64> = out[..na].iter().map(|r| S_MAX * (r / S_MAX).tanh()).collect();
        let t = out[na..].to_vec();
        (s, t, out, trace)
    }
}

fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

impl BijectiveBlock for AffineCoupling {
    fn dim(&self) -> usize {
        self.dim
    }
    fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_len("coupling input", z.len(), self.dim)?;
        let sp = self.split();
        let (s, t, _, _) = self.scale_shift(&pick(z, &sp.cond));
        let mut y = z.to_vec();
        for (k, &i) in sp.active.iter().enumerate() {
            y[i] = z[i] * s[k].exp() + t[k];
        }
        Ok((y, s.iter().sum()))
    }
    fn inverse(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_len("coupling input", y.len(), self.dim)?;
        let sp = self.split();
        let (s, t, _, _) = self.scale_shift(&pick(y, &sp.cond));
        let mut z = y.to_vec();
        for (k, &i) in sp.active.iter().enumerate() {
            z[i] = (y[i] - t[k]) * (-s[k]).exp();
        }
        Ok((z, s.iter().sum()))
    }
    fn params(&self) -> Vec<f64> {
        self.net.params.clone()
    }
    fn set_params(&mut self, p: &[f64]) {
        self.net.params.copy_from_slice(p);
    }
    fn forward_vjp(&self, z: &[f64], dy: &[f64], dld: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        let sp = self.split();
        let zc = pick(z, &sp.cond);
        let (s, _, _, trace) = self.scale_shift(&zc);
        let na = sp.active.len();
        let mut dz = dy.to_vec();
        let mut dout = vec![0.0; 2 * na];
        for (k, &i) in sp.active.iter().enumerate() {
            let e = s[k].exp();
            dz[i] = dy[i] * e;
            let ds = dy[i] * z[i] * e + dld;
            dout[k] = ds * (1.0 - (s[k] / S_MAX).powi(2));
            dout[na + k] = dy[i];
        }
        let dzc = self.net.backward(&zc, &trace, &dout, raw);
        for (k, &i) in sp.cond.iter().enumerate() {
            dz[i] += dzc[k];
        }
        Ok(dz)
    }
    fn inverse_vjp(&self, y: &[f64], dz: &[f64], dld: f64, raw: &mut [f64]) -> Result<Vec<f64>> {
        let sp = self.split();
        let yc = pick(y, &sp.cond);
        let (s, t, _, trace) = self.scale_shift(&yc);
        let na = sp.active.len();
        let mut dy = dz.to_vec();
        let mut dout = vec![0.0; 2 * na];
        for (k, &i) in sp.active.iter().enumerate() {
            let e = (-s[k]).exp();
            let zi = (y[i] - t[k]) * e;
            dy[i] = dz[i] * e;
            let ds = -dz[i] * zi + dld;
            dout[k] = ds * (1.0 - (s[k] / S_MAX).powi(2));
            dout[na + k] = -dz[i] * e;
        }
        let dyc = self.net.backward(&yc, &trace, &dout, raw);
        for (k, &i) in sp.cond.iter().enumerate() {
            dy[i] += dyc[k];
        }
        Ok(dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_output_layer_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = AffineCoupling::new(4, 0, 16, &mut rng).unwrap();
        let (y, ld) = c.forward(&[0.1, 0.2, -0.3, 0.4]).unwrap();
        assert_eq!(y, vec![0.1, 0.2, -0.3, 0.4]);
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn alternating_parities_cover_every_coordinate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for d in 2..7 {
            let a = AffineCoupling::new(d, 0, 4, &mut rng).unwrap();
            let b = AffineCoupling::new(d, 1, 4, &mut rng).unwrap();
            let mut seen: Vec<usize> = a.active_indices();
            seen.extend(b.active_indices());
            seen.sort();
            assert_eq!(seen, (0..d).collect::<Vec<_>>());
        }
    }
}
