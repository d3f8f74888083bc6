use serde::{Deserialize, Serialize};

use crate::network::Param;
use crate::tensor::Tensor;
use crate::NeuralError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0004,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Param]) -> Self {
        let zeros: Vec<Tensor> = params
            .iter()
            .map(|p| Tensor::zeros(p.value.rows(), p.value.cols()))
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Gradients are checked before anything is
    /// modified, so a non-finite gradient leaves parameters and state intact.
    pub fn step(&mut self, params: &mut [Param], grads: &[Tensor]) -> Result<(), NeuralError> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(NeuralError::Shape(format!(
                "adam: {} params, {} gradients, {} moment slots",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.value.shape() != g.shape() {
                return Err(NeuralError::Shape(format!(
                    "adam: gradient for {} is {:?}, parameter is {:?}",
                    p.name,
                    g.shape(),
                    p.value.shape()
                )));
            }
            if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
                return Err(NeuralError::NonFinite {
                    what: format!("gradient of {}[{pos}] = {}", p.name, g.data()[pos]),
                    step: self.step + 1,
                });
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let values = p.value.data_mut();
            for (i, &gi) in g.data().iter().enumerate() {
                let mi = beta1 * m.data()[i] + (1.0 - beta1) * gi;
                let vi = beta2 * v.data()[i] + (1.0 - beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let m_hat = mi / correction1;
                let v_hat = vi / correction2;
                values[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
            if !p.value.is_finite() {
                return Err(NeuralError::NonFinite {
                    what: format!("parameter {} after update", p.name),
                    step: self.step,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> Vec<Param> {
        vec![Param {
            name: "w".into(),
            value: Tensor::scalar(v),
        }]
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = scalar_param(1.5);
        let mut adam = Adam::new(AdamConfig::default(), &params);
        adam.step(&mut params, &[Tensor::scalar(0.0)]).unwrap();
        assert_eq!(params[0].value.get(0, 0), 1.5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [1.0, -3.0, 1e-3, 250.0] {
            let mut params = scalar_param(0.0);
            let mut adam = Adam::new(AdamConfig::default(), &params);
            adam.step(&mut params, &[Tensor::scalar(g)]).unwrap();
            // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
            let expected = -0.0004 * g / (g.abs() + 1e-8);
            assert!((params[0].value.get(0, 0) - expected).abs() < 1e-15, "g = {g}");
        }
    }

    #[test]
    fn two_steps_match_unrolled_recurrence() {
        let cfg = AdamConfig::default();
        let g = 0.7;
        let mut params = scalar_param(2.0);
        let mut adam = Adam::new(cfg, &params);
        adam.step(&mut params, &[Tensor::scalar(g)]).unwrap();
        adam.step(&mut params, &[Tensor::scalar(g)]).unwrap();

        let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
        let mut w = 2.0;
        let m1 = (1.0 - b1) * g;
        let v1 = (1.0 - b2) * g * g;
        w -= lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * g;
        let v2 = b2 * v1 + (1.0 - b2) * g * g;
        w -= lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert!((params[0].value.get(0, 0) - w).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut params = scalar_param(1.0);
        let mut adam = Adam::new(AdamConfig::default(), &params);
        let err = adam.step(&mut params, &[Tensor::scalar(f64::NAN)]).unwrap_err();
        assert!(matches!(err, NeuralError::NonFinite { step: 1, .. }));
        assert_eq!(params[0].value.get(0, 0), 1.0);
        assert_eq!(adam.steps_taken(), 0);
    }
}
