use crate::error::{CefError, Result};

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(CefError::Shape(format!(
                "Adam state has {} entries, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(CefError::Numeric("non-finite gradient passed to Adam".into()));
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut a = Adam::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 3.0];
        a.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // m̂ = 1, v̂ = 1 after bias correction, so Δ = −lr / (1 + ε)
        let lr = 1e-3;
        let mut a = Adam::new(1, lr);
        let mut p = vec![0.0];
        a.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] + lr / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut a = Adam::new(2, 0.05);
            let mut p = vec![0.5, -0.5];
            for k in 0..50 {
                let g = [p[0] * 2.0 + (k as f64).sin(), p[1] - 0.3];
                a.step(&mut p, &g).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut a = Adam::new(1, 0.1);
        assert!(a.step(&mut [0.0], &[f64::NAN]).is_err());
        assert!(a.step(&mut [0.0, 1.0], &[0.0]).is_err());
    }
}
