use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    AdaGrad,
    RmsProp,
    Adam,
}

impl OptimizerKind {
    pub fn default_learning_rate(self) -> f64 {
        match self {
            OptimizerKind::AdaGrad | OptimizerKind::RmsProp => 0.01,
            OptimizerKind::Adam => 0.001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// RMSProp decay of the squared-gradient average.
    pub rho: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerSettings {
    pub fn new(kind: OptimizerKind) -> Self {
        OptimizerSettings {
            kind,
            learning_rate: kind.default_learning_rate(),
            rho: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Element-wise adaptive optimizer over a list of parameter tensors.
///
/// * AdaGrad: `G += g^2; theta -= lr * g / (sqrt(G) + eps)`
/// * RMSProp: `E = rho E + (1 - rho) g^2; theta -= lr * g / (sqrt(E) + eps)`
/// * Adam: first/second moment averages with bias correction,
///   `theta -= lr * m_hat / (sqrt(v_hat) + eps)`
#[derive(Debug, Clone)]
pub struct Optimizer {
    settings: OptimizerSettings,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(settings: OptimizerSettings, tensor_lens: &[usize]) -> Self {
        let zeros = || tensor_lens.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        let first = if settings.kind == OptimizerKind::Adam { zeros() } else { Vec::new() };
        Optimizer { settings, step: 0, first, second: zeros() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update. Gradients are checked for NaN/inf before anything moves.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) -> Result<(), ModelError> {
        if params.len() != self.second.len() || grads.len() != self.second.len() {
            return Err(ModelError::InvalidConfig("optimizer tensor count mismatch".into()));
        }
        for (i, g) in grads.iter().enumerate() {
            if g.len() != self.second[i].len() || params[i].len() != g.len() {
                return Err(ModelError::InvalidConfig(format!("optimizer tensor {i} shape mismatch")));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteGradient { tensor: i });
            }
        }
        self.step += 1;
        let OptimizerSettings { kind, learning_rate: lr, rho, beta1, beta2, epsilon: eps } = self.settings;
        match kind {
            OptimizerKind::AdaGrad => {
                for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.second) {
                    for ((p, &g), a) in p.iter_mut().zip(g).zip(acc.iter_mut()) {
                        *a += g * g;
                        *p -= lr * g / (a.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::RmsProp => {
                for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.second) {
                    for ((p, &g), e) in p.iter_mut().zip(g).zip(acc.iter_mut()) {
                        *e = rho * *e + (1.0 - rho) * g * g;
                        *p -= lr * g / (e.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *p -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(settings: OptimizerSettings, g: f64) -> f64 {
        let mut opt = Optimizer::new(settings, &[1]);
        let mut p = [0.0];
        opt.step(&mut [&mut p[..]], &[vec![g]]).unwrap();
        -p[0]
    }

    #[test]
    fn adagrad_first_step() {
        let s = OptimizerSettings { learning_rate: 0.1, ..OptimizerSettings::new(OptimizerKind::AdaGrad) };
        let u = one_step(s, 2.0);
        assert!((u - 0.1 * 2.0 / (2.0 + 1e-8)).abs() < 1e-12);
        assert!((u - 0.1).abs() < 1e-8);
    }

    #[test]
    fn rmsprop_first_step() {
        let s = OptimizerSettings { learning_rate: 0.1, ..OptimizerSettings::new(OptimizerKind::RmsProp) };
        let u = one_step(s, 1.0);
        assert!((u - 0.1 / (0.1f64.sqrt() + 1e-8)).abs() < 1e-12);
        assert!((u - 0.31623).abs() < 1e-5);
    }

    #[test]
    fn adam_first_step() {
        let u = one_step(OptimizerSettings::new(OptimizerKind::Adam), 1.0);
        assert!((u - 0.001 / (1.0 + 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn nan_gradient_rejected_without_update() {
        let mut opt = Optimizer::new(OptimizerSettings::new(OptimizerKind::Adam), &[2]);
        let mut p = [1.0, 2.0];
        let err = opt.step(&mut [&mut p[..]], &[vec![0.5, f64::NAN]]).unwrap_err();
        assert_eq!(err, ModelError::NonFiniteGradient { tensor: 0 });
        assert_eq!(p, [1.0, 2.0]);
        assert_eq!(opt.steps_taken(), 0);
    }

    #[test]
    fn adagrad_accumulates() {
        let s = OptimizerSettings { learning_rate: 1.0, epsilon: 0.0, ..OptimizerSettings::new(OptimizerKind::AdaGrad) };
        let mut opt = Optimizer::new(s, &[1]);
        let mut p = [0.0];
        opt.step(&mut [&mut p[..]], &[vec![3.0]]).unwrap();
        opt.step(&mut [&mut p[..]], &[vec![4.0]]).unwrap();
        // 3/3 + 4/5
        assert!((p[0] + 1.8).abs() < 1e-15);
    }
}
