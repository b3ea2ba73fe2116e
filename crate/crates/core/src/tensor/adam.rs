use serde::{Deserialize, Serialize};

use super::{ParamStore, Result, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments, one moment pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = |t: &Tensor| Tensor::zeros(t.shape());
        Self {
            config,
            step: 0,
            m: params.tensors().iter().map(zeros).collect(),
            v: params.tensors().iter().map(zeros).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Non-finite gradients abort before any parameter
    /// is touched.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(TensorError::Invalid {
                op: "adam_step",
                msg: format!("{} gradients for {} parameters", grads.len(), params.len()),
            });
        }
        for (i, (p, g)) in params.tensors().iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                return Err(TensorError::NonFiniteGradient(i));
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.data_mut() {
                *x *= s;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(x: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("x", Tensor::from_vec(vec![x]));
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = scalar_store(1.5);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        for _ in 0..10 {
            adam.step(&mut p, &[Tensor::from_vec(vec![0.0])]).unwrap();
        }
        assert_eq!(p.tensors()[0].data()[0], 1.5);
    }

    #[test]
    fn constant_gradient_moves_by_lr_per_step() {
        // With a constant gradient the bias-corrected m_hat = g and
        // v_hat = g^2 exactly, so every step moves by lr * g / (|g| + eps).
        let cfg = AdamConfig::default();
        let g = -0.37;
        let mut p = scalar_store(0.0);
        let mut adam = Adam::new(cfg, &p);
        let mut prev = 0.0;
        for _ in 0..200 {
            adam.step(&mut p, &[Tensor::from_vec(vec![g])]).unwrap();
            let now = p.tensors()[0].data()[0];
            let expected = cfg.lr * g.abs() / (g.abs() + cfg.eps);
            assert!(((now - prev) - expected).abs() < 1e-12);
            prev = now;
        }
    }

    #[test]
    fn minimizes_scalar_quadratic() {
        // Steps are at most ~lr, so 2000 steps cover a start at 0.2.
        let mut p = scalar_store(0.2);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        for _ in 0..2000 {
            let x = p.tensors()[0].data()[0];
            adam.step(&mut p, &[Tensor::from_vec(vec![2.0 * x])]).unwrap();
        }
        assert!(p.tensors()[0].data()[0].abs() < 1e-3);
    }

    #[test]
    fn nan_gradient_is_rejected() {
        let mut p = scalar_store(1.0);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let err = adam.step(&mut p, &[Tensor::from_vec(vec![f64::NAN])]);
        assert!(matches!(err, Err(TensorError::NonFiniteGradient(0))));
        assert_eq!(p.tensors()[0].data()[0], 1.0);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = vec![Tensor::from_vec(vec![3.0, 4.0])];
        let before = clip_grad_norm(&mut g, 1.0);
        assert!((before - 5.0).abs() < 1e-12);
        assert!((g[0].norm() - 1.0).abs() < 1e-12);
    }
}
