use serde::{Deserialize, Serialize};

use super::{check_upstream, Scorer, SparseFeatures};
use crate::error::Result;

/// One free logit per item; features are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeParamModel {
    theta: Vec<f64>,
}

impl FreeParamModel {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

impl Scorer for FreeParamModel {
    fn n_inputs(&self) -> usize {
        0
    }

    fn n_outputs(&self) -> usize {
        self.theta.len()
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn forward(&self, _x: &SparseFeatures) -> Result<Vec<f64>> {
        Ok(self.theta.clone())
    }

    fn backward(&self, _x: &SparseFeatures, upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        check_upstream(upstream, grad, self.theta.len(), self.theta.len())?;
        for (g, u) in grad.iter_mut().zip(upstream) {
            *g += u;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_returns_theta_and_backward_is_identity() {
        let m = FreeParamModel::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(m.forward(&[(7, 1.0)]).unwrap(), vec![1.0, 2.0, 3.0]);
        let mut g = vec![0.0; 3];
        m.backward(&[], &[0.5, -1.0, 2.0], &mut g).unwrap();
        assert_eq!(g, vec![0.5, -1.0, 2.0]);
    }
}
