//! Simulation grid cells and the per-step timing harness.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{mse_vs_truth, SimConfig, SimDataset};
use crate::error::Result;
use crate::losses::{evaluate_loss, LossContext, LossKind};
use crate::models::{train, FreeParamModel, Model, Optimizer, OptimizerKind, Scorer, TrainConfig};
use crate::pl::{derived_rng, mix_seed};
use crate::quadrature::{loglog_fit, IntegrationConfig, Integrator};

/// Optimisation settings for the free-parameter simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub patience: usize,
    pub integration: IntegrationConfig,
}

impl Default for SimTrainParams {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 20,
            optimizer: OptimizerKind::AdaGrad,
            lr: 0.1,
            patience: 2,
            integration: IntegrationConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub n_items: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub mse: f64,
    pub epochs_run: usize,
    pub final_loss: f64,
}

/// Fits free parameters on `data` with `loss` and scores them against the truth.
/// Early stopping monitors the training loss.
pub fn run_simulation_on(data: &SimDataset, loss: LossKind, params: &SimTrainParams) -> Result<SimOutcome> {
    let cfg = TrainConfig {
        batch_size: params.batch_size,
        optimizer: params.optimizer,
        lr: params.lr,
        max_epochs: params.epochs,
        patience: params.patience,
        valid_fraction: 0.0,
        loss,
        integration: params.integration,
        seed: data.config.seed,
        ..TrainConfig::default()
    };
    let model = Model::Free(FreeParamModel::zeros(data.config.n_items));
    let (best, log) = train(model, data, None, &cfg)?;
    Ok(SimOutcome {
        n_items: data.config.n_items,
        n_samples: data.config.n_samples,
        seed: data.config.seed,
        loss,
        mse: mse_vs_truth(best.params(), &data.truth),
        epochs_run: log.epochs.len(),
        final_loss: log.best_valid_loss().unwrap_or(f64::NAN),
    })
}

pub fn run_simulation_cell(sim: &SimConfig, loss: LossKind, params: &SimTrainParams) -> Result<SimOutcome> {
    run_simulation_on(&SimDataset::generate(sim)?, loss, params)
}

/// Settings of the per-step timing run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub steps: usize,
    pub batch_size: usize,
    pub intervals: usize,
    pub partitions: usize,
    pub cap: usize,
    /// Distinct samples cycled through by the batches.
    pub pool: usize,
    pub seed: u64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 20,
            intervals: 1000,
            partitions: 4,
            cap: 10,
            pool: 200,
            seed: 0,
        }
    }
}

/// Wall-clock seconds for `steps` PL-Partition AdaGrad steps on `n_items` free parameters.
pub fn time_training_steps(n_items: usize, params: &ScalingParams) -> Result<f64> {
    let sim = SimConfig {
        n_items,
        n_samples: params.pool,
        partitions: params.partitions,
        cap: params.cap,
        seed: params.seed,
    };
    let data = SimDataset::generate(&sim)?;
    let ctx = LossContext::new(Integrator::new(
        IntegrationConfig::default().with_intervals(params.intervals),
    )?);
    let mut model = FreeParamModel::zeros(n_items);
    let mut opt = Optimizer::new(OptimizerKind::AdaGrad, 0.1, n_items);
    let mut grad = vec![0.0; n_items];
    let rng_seed = mix_seed(params.seed, 3);

    let start = Instant::now();
    for step in 0..params.steps {
        let batch: Vec<usize> = (0..params.batch_size)
            .map(|j| (step * params.batch_size + j) % data.samples.len())
            .collect();
        let theta = model.params();
        let grads: Vec<Result<Vec<f64>>> = batch
            .par_iter()
            .map(|&i| {
                let s = &data.samples[i];
                let mut rng = derived_rng(rng_seed, i as u64);
                evaluate_loss(LossKind::PlPartition, &s.pref, None, theta, &ctx, &mut rng)
                    .map(|o| o.grad.into_vec())
            })
            .collect();
        grad.iter_mut().for_each(|g| *g = 0.0);
        for g in grads {
            for (acc, v) in grad.iter_mut().zip(g?) {
                *acc += v / params.batch_size as f64;
            }
        }
        opt.step(model.params_mut(), &grad);
    }
    Ok(start.elapsed().as_secs_f64())
}

/// Log-log slope of time against `N`.
pub fn scaling_slope(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(n, t)| ((n as f64).ln(), t.ln()))
        .collect();
    loglog_fit(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cell_runs_and_is_deterministic() {
        let sim = SimConfig {
            n_items: 12,
            n_samples: 200,
            partitions: 3,
            cap: 6,
            seed: 4,
        };
        let params = SimTrainParams {
            epochs: 3,
            integration: IntegrationConfig::default().with_intervals(200),
            ..SimTrainParams::default()
        };
        let a = run_simulation_cell(&sim, LossKind::PlPartition, &params).unwrap();
        let b = run_simulation_cell(&sim, LossKind::PlPartition, &params).unwrap();
        assert!(a.mse.is_finite());
        assert_eq!(a, b);
    }

    #[test]
    fn timing_harness_runs() {
        let p = ScalingParams {
            steps: 5,
            pool: 10,
            intervals: 50,
            ..ScalingParams::default()
        };
        assert!(time_training_steps(50, &p).unwrap() >= 0.0);
        assert!((scaling_slope(&[(10, 1.0), (100, 10.0)]).unwrap() - 1.0).abs() < 1e-12);
    }
}
