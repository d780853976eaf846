//! Trainable scorers mapping sparse features to per-item logits.

mod free;
mod linear;
mod mlp;
pub mod optim;
pub mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use free::FreeParamModel;
pub use linear::LinearModel;
pub use mlp::{MlpModel, DEFAULT_HIDDEN};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{train, EpochRecord, Subset, TrainConfig, TrainLog, Trainer, TrainingSet};

/// Sparse input row: `(feature index, value)` pairs sorted by index.
pub type SparseFeatures = [(u32, f64)];

/// Parameters are kept in one flat vector so optimizers stay model-agnostic.
pub trait Scorer {
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn forward(&self, x: &SparseFeatures) -> Result<Vec<f64>>;
    /// Adds the parameter gradient for upstream logit gradient `upstream` into `grad`.
    fn backward(&self, x: &SparseFeatures, upstream: &[f64], grad: &mut [f64]) -> Result<()>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    Free(FreeParamModel),
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Free(_) => "free",
            Model::Linear(_) => "linear",
            Model::Mlp(_) => "mlp",
        }
    }

    fn inner(&self) -> &dyn Scorer {
        match self {
            Model::Free(m) => m,
            Model::Linear(m) => m,
            Model::Mlp(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Scorer {
        match self {
            Model::Free(m) => m,
            Model::Linear(m) => m,
            Model::Mlp(m) => m,
        }
    }
}

impl Scorer for Model {
    fn n_inputs(&self) -> usize {
        self.inner().n_inputs()
    }

    fn n_outputs(&self) -> usize {
        self.inner().n_outputs()
    }

    fn params(&self) -> &[f64] {
        self.inner().params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.inner_mut().params_mut()
    }

    fn forward(&self, x: &SparseFeatures) -> Result<Vec<f64>> {
        self.inner().forward(x)
    }

    fn backward(&self, x: &SparseFeatures, upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        self.inner().backward(x, upstream, grad)
    }
}

/// Uniform in `+-sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize, out: &mut [f64]) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = rng.gen_range(-bound..=bound);
    }
}

pub(crate) fn check_features(x: &SparseFeatures, d_in: usize) -> Result<()> {
    match x.iter().find(|(f, _)| *f as usize >= d_in) {
        Some(&(f, _)) => Err(Error::IndexOutOfRange {
            index: f as usize,
            bound: d_in,
            line: None,
        }),
        None => Ok(()),
    }
}

pub(crate) fn check_upstream(upstream: &[f64], grad: &[f64], n_out: usize, n_params: usize) -> Result<()> {
    if upstream.len() != n_out || grad.len() != n_params {
        return Err(Error::DegenerateInput(format!(
            "backward got {} upstream values and {} gradient slots, expected {n_out} and {n_params}",
            upstream.len(),
            grad.len()
        )));
    }
    Ok(())
}
