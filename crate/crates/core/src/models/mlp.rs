use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_features, check_upstream, glorot, Scorer, SparseFeatures};
use crate::error::Result;

pub const DEFAULT_HIDDEN: usize = 256;

/// Two fully connected layers with a ReLU in between.
///
/// Parameter layout: `W1 (d_in x hidden)`, `b1`, `W2 (hidden x n_out)`, `b2`,
/// each weight matrix row-major by its input dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    d_in: usize,
    hidden: usize,
    n_out: usize,
    params: Vec<f64>,
}

impl MlpModel {
    pub fn new<R: Rng + ?Sized>(d_in: usize, n_out: usize, hidden: usize, rng: &mut R) -> Self {
        let mut m = Self {
            d_in,
            hidden,
            n_out,
            params: vec![0.0; d_in * hidden + hidden + hidden * n_out + n_out],
        };
        let (w1, w2) = (m.w1_range(), m.w2_range());
        glorot(rng, d_in, hidden, &mut m.params[w1]);
        glorot(rng, hidden, n_out, &mut m.params[w2]);
        m
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.d_in * self.hidden
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.d_in * self.hidden;
        s..s + self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.b1_range().end;
        s..s + self.hidden * self.n_out
    }

    fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.w2_range().end;
        s..s + self.n_out
    }

    /// Hidden pre-activations.
    fn hidden_pre(&self, x: &SparseFeatures) -> Vec<f64> {
        let mut h = self.params[self.b1_range()].to_vec();
        let w1 = &self.params[self.w1_range()];
        for &(f, v) in x {
            let row = &w1[f as usize * self.hidden..(f as usize + 1) * self.hidden];
            for (hj, w) in h.iter_mut().zip(row) {
                *hj += v * w;
            }
        }
        h
    }
}

impl Scorer for MlpModel {
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
        let pre = self.hidden_pre(x);
        let mut z = self.params[self.b2_range()].to_vec();
        let w2 = &self.params[self.w2_range()];
        for (j, &a) in pre.iter().enumerate() {
            if a > 0.0 {
                let row = &w2[j * self.n_out..(j + 1) * self.n_out];
                for (zl, w) in z.iter_mut().zip(row) {
                    *zl += a * w;
                }
            }
        }
        Ok(z)
    }

    fn backward(&self, x: &SparseFeatures, upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        check_features(x, self.d_in)?;
        check_upstream(upstream, grad, self.n_out, self.params.len())?;
        let pre = self.hidden_pre(x);
        let w2 = &self.params[self.w2_range()];
        let mut delta = vec![0.0; self.hidden];
        {
            let gw2 = &mut grad[self.w2_range()];
            for (j, &a) in pre.iter().enumerate() {
                if a > 0.0 {
                    let row = &w2[j * self.n_out..(j + 1) * self.n_out];
                    let grow = &mut gw2[j * self.n_out..(j + 1) * self.n_out];
                    let mut back = 0.0;
                    for ((g, w), u) in grow.iter_mut().zip(row).zip(upstream) {
                        *g += a * u;
                        back += w * u;
                    }
                    delta[j] = back;
                }
            }
        }
        for (g, u) in grad[self.b2_range()].iter_mut().zip(upstream) {
            *g += u;
        }
        for (g, d) in grad[self.b1_range()].iter_mut().zip(&delta) {
            *g += d;
        }
        let gw1 = &mut grad[self.w1_range()];
        for &(f, v) in x {
            let row = &mut gw1[f as usize * self.hidden..(f as usize + 1) * self.hidden];
            for (g, d) in row.iter_mut().zip(&delta) {
                *g += v * d;
            }
        }
        Ok(())
    }
}
