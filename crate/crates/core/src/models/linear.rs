use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_features, check_upstream, glorot, Scorer, SparseFeatures};
use crate::error::Result;

/// `z = W^T x + b`, with `W` stored row-major by input feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    d_in: usize,
    n_out: usize,
    params: Vec<f64>,
}

impl LinearModel {
    pub fn new<R: Rng + ?Sized>(d_in: usize, n_out: usize, rng: &mut R) -> Self {
        let mut params = vec![0.0; d_in * n_out + n_out];
        glorot(rng, d_in, n_out, &mut params[..d_in * n_out]);
        Self { d_in, n_out, params }
    }

    /// Builds from explicit weights (`d_in` rows of `n_out`) and bias.
    pub fn from_parts(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Self {
        let d_in = weights.len();
        let n_out = bias.len();
        let mut params: Vec<f64> = weights.into_iter().flatten().collect();
        assert_eq!(params.len(), d_in * n_out, "weight rows must have n_out entries");
        params.extend(bias);
        Self { d_in, n_out, params }
    }

    fn bias_offset(&self) -> usize {
        self.d_in * self.n_out
    }
}

impl Scorer for LinearModel {
    fn n_inputs(&self) -> usize {
        self.d_in
    }

    fn n_outputs(&self) -> usize {
        self.n_out
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, x: &SparseFeatures) -> Result<Vec<f64>> {
        check_features(x, self.d_in)?;
        let mut z = self.params[self.bias_offset()..].to_vec();
        for &(f, v) in x {
            let row = &self.params[f as usize * self.n_out..(f as usize + 1) * self.n_out];
            for (zl, w) in z.iter_mut().zip(row) {
                *zl += v * w;
            }
        }
        Ok(z)
    }

    fn backward(&self, x: &SparseFeatures, upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        check_features(x, self.d_in)?;
        check_upstream(upstream, grad, self.n_out, self.params.len())?;
        for &(f, v) in x {
            let row = &mut grad[f as usize * self.n_out..(f as usize + 1) * self.n_out];
            for (g, u) in row.iter_mut().zip(upstream) {
                *g += v * u;
            }
        }
        let off = self.bias_offset();
        for (g, u) in grad[off..].iter_mut().zip(upstream) {
            *g += u;
        }
        Ok(())
    }
}
