//! First-order optimizers over a flat parameter vector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADAGRAD_EPS: f64 = 1e-10;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    AdaGrad,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::AdaGrad => "adagrad",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adagrad" => Ok(OptimizerKind::AdaGrad),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::InvalidConfig(format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    steps: u64,
    /// AdaGrad: sum of squared gradients. Adam: first moment.
    first: Vec<f64>,
    /// Adam: second moment.
    second: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::AdaGrad => (vec![0.0; n_params], Vec::new()),
            OptimizerKind::Adam => (vec![0.0; n_params], vec![0.0; n_params]),
        };
        Self {
            kind,
            lr,
            steps: 0,
            first,
            second,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        self.steps += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::AdaGrad => {
                for ((p, g), acc) in params.iter_mut().zip(grad).zip(&mut self.first) {
                    *acc += g * g;
                    *p -= lr * g / (acc.sqrt() + ADAGRAD_EPS);
                }
            }
            OptimizerKind::Adam => {
                let t = self.steps as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut p = vec![1.0, -2.0];
        Optimizer::new(OptimizerKind::Sgd, 0.1, 2).step(&mut p, &[0.5, -1.0]);
        assert!((p[0] - 0.95).abs() < 1e-15 && (p[1] + 1.9).abs() < 1e-15);
    }

    #[test]
    fn first_adagrad_step_normalises_by_gradient_magnitude() {
        let g = [0.3, -4.0, 1e-3, 0.0];
        let mut p = vec![0.0; 4];
        Optimizer::new(OptimizerKind::AdaGrad, 0.1, 4).step(&mut p, &g);
        for i in 0..4 {
            let expected = -0.1 * g[i] / ((g[i] * g[i]).sqrt() + ADAGRAD_EPS);
            assert!((p[i] - expected).abs() < 1e-15, "{i}");
        }
    }

    #[test]
    fn first_adam_step_is_bounded_by_lr() {
        let g = [0.3, -4.0, 1e-6, 25.0];
        let mut p = vec![0.0; 4];
        Optimizer::new(OptimizerKind::Adam, 0.01, 4).step(&mut p, &g);
        for i in 0..4 {
            assert!(p[i].abs() <= 0.01 * (1.0 + 1e-9));
            assert!(p[i] * g[i] < 0.0);
        }
    }

    #[test]
    fn names_parse() {
        for k in [OptimizerKind::Sgd, OptimizerKind::AdaGrad, OptimizerKind::Adam] {
            assert_eq!(k.to_string().parse::<OptimizerKind>().unwrap(), k);
        }
    }
}
