use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{axpy, dot};

/// Two-hidden-layer tanh perceptron with a zero-initialized output layer.
/// Parameters are `[W1, b1, W2, b2, W3, b3]`, weights row-major `out×in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub params: Vec<f64>,
}

/// Hidden activations kept for the backward pass.
pub struct MlpTrace {
    a1: Vec<f64>,
    a2: Vec<f64>,
}

impl Mlp {
    pub fn param_len(inputs: usize, hidden: usize, outputs: usize) -> usize {
        hidden * inputs + hidden + hidden * hidden + hidden + outputs * hidden + outputs
    }

    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let mut params = Vec::with_capacity(Self::param_len(inputs, hidden, outputs));
        let s1 = 1.0 / (inputs.max(1) as f64).sqrt();
        params.extend((0..hidden * inputs).map(|_| s1 * rng.sample::<f64, _>(StandardNormal)));
        params.extend(std::iter::repeat_n(0.0, hidden));
        let s2 = 1.0 / (hidden as f64).sqrt();
        params.extend((0..hidden * hidden).map(|_| s2 * rng.sample::<f64, _>(StandardNormal)));
        params.extend(std::iter::repeat_n(0.0, hidden));
        params.extend(std::iter::repeat_n(0.0, outputs * hidden + outputs));
        Self { inputs, hidden, outputs, params }
    }

    fn offsets(&self) -> [usize; 6] {
        let (i, h, o) = (self.inputs, self.hidden, self.outputs);
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + o * h;
        [w1, b1, w2, b2, w3, b3]
    }

    fn dense(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        b.iter().enumerate().map(|(r, bi)| bi + dot(&w[r * n..(r + 1) * n], x)).collect()
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, MlpTrace) {
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let (h, o) = (self.hidden, self.outputs);
        let p = &self.params;
        let a1: Vec<f64> = Self::dense(&p[w1..b1], &p[b1..b1 + h], x).into_iter().map(f64::tanh).collect();
        let a2: Vec<f64> = Self::dense(&p[w2..b2], &p[b2..b2 + h], &a1).into_iter().map(f64::tanh).collect();
        let out = Self::dense(&p[w3..b3], &p[b3..b3 + o], &a2);
        (out, MlpTrace { a1, a2 })
    }

    /// Accumulates parameter gradients into `grad` and returns `dx`.
    pub fn backward(&self, x: &[f64], trace: &MlpTrace, dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let (h, o) = (self.hidden, self.outputs);
        let p = &self.params;

        let mut da2 = vec![0.0; h];
        for r in 0..o {
            axpy(dout[r], &trace.a2, &mut grad[w3 + r * h..w3 + (r + 1) * h]);
            grad[b3 + r] += dout[r];
            axpy(dout[r], &p[w3 + r * h..w3 + (r + 1) * h], &mut da2);
        }
        let dz2: Vec<f64> = da2.iter().zip(&trace.a2).map(|(d, a)| d * (1.0 - a * a)).collect();

        let mut da1 = vec![0.0; h];
        for r in 0..h {
            axpy(dz2[r], &trace.a1, &mut grad[w2 + r * h..w2 + (r + 1) * h]);
            grad[b2 + r] += dz2[r];
            axpy(dz2[r], &p[w2 + r * h..w2 + (r + 1) * h], &mut da1);
        }
        let dz1: Vec<f64> = da1.iter().zip(&trace.a1).map(|(d, a)| d * (1.0 - a * a)).collect();

        let n = self.inputs;
        let mut dx = vec![0.0; n];
        for r in 0..h {
            axpy(dz1[r], x, &mut grad[w1 + r * n..w1 + (r + 1) * n]);
            grad[b1 + r] += dz1[r];
            axpy(dz1[r], &p[w1 + r * n..w1 + (r + 1) * n], &mut dx);
        }
        dx
    }
}
