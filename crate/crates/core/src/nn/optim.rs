use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub kind: OptimizerKind,
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        Self {
            lr,
            kind: OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self {
            lr,
            kind: OptimizerKind::Sgd,
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

/// Optimizer with per-parameter moment buffers. Parameters must be passed in
/// the same order on every step.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: Vec<&mut Tensor>) -> Result<()> {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len()
            || self.first.iter().zip(&params).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        self.steps += 1;
        let lr = self.config.lr;
        for (i, p) in params.into_iter().enumerate() {
            let (values, grad) = p.data_and_grad_mut();
            let Some(grad) = grad else {
                return Err(Error::InvalidArgument(format!("parameter {i} has no gradient slot")));
            };
            match self.config.kind {
                OptimizerKind::Sgd => {
                    for (v, g) in values.iter_mut().zip(grad.iter()) {
                        *v -= lr * g;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let bc1 = 1.0 - beta1.powi(self.steps as i32);
                    let bc2 = 1.0 - beta2.powi(self.steps as i32);
                    let (m, s) = (&mut self.first[i], &mut self.second[i]);
                    for j in 0..values.len() {
                        let g = grad[j];
                        m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                        s[j] = beta2 * s[j] + (1.0 - beta2) * g * g;
                        let mhat = m[j] / bc1;
                        let shat = s[j] / bc2;
                        values[j] -= lr * mhat / (shat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
