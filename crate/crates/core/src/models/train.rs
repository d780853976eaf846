//! Minibatch training with validation-based early stopping.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Model, Optimizer, OptimizerKind, Scorer, SparseFeatures};
use crate::error::{Error, Result};
use crate::losses::{evaluate_loss, LossContext, LossKind, DEFAULT_PAIR_BUDGET};
use crate::pl::{derived_rng, mix_seed, rng_from_seed, ItemId, PartitionedPreference};
use crate::quadrature::{IntegrationConfig, Integrator};

/// Indexed collection of training targets.
pub trait TrainingSet: Sync {
    fn len(&self) -> usize;
    fn features(&self, i: usize) -> &SparseFeatures;
    fn preference(&self, i: usize) -> Result<Cow<'_, PartitionedPreference>>;
    /// Full ranking of the upper blocks, when the source knows it.
    fn top_order(&self, _i: usize) -> Option<&[ItemId]> {
        None
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A view of selected rows of another set.
pub struct Subset<'a, T: ?Sized> {
    inner: &'a T,
    indices: Vec<usize>,
}

impl<'a, T: TrainingSet + ?Sized> Subset<'a, T> {
    pub fn new(inner: &'a T, indices: Vec<usize>) -> Self {
        Self { inner, indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl<T: TrainingSet + ?Sized> TrainingSet for Subset<'_, T> {
    fn len(&self) -> usize {
        self.indices.len()
    }

    fn features(&self, i: usize) -> &SparseFeatures {
        self.inner.features(self.indices[i])
    }

    fn preference(&self, i: usize) -> Result<Cow<'_, PartitionedPreference>> {
        self.inner.preference(self.indices[i])
    }

    fn top_order(&self, i: usize) -> Option<&[ItemId]> {
        self.inner.top_order(self.indices[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub valid_fraction: f64,
    pub loss: LossKind,
    pub integration: IntegrationConfig,
    pub seed: u64,
    pub pair_budget: usize,
    pub margin: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            max_epochs: 20,
            patience: 3,
            valid_fraction: 0.25,
            loss: LossKind::PlPartition,
            integration: IntegrationConfig::default(),
            seed: 0,
            pair_budget: DEFAULT_PAIR_BUDGET,
            margin: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.valid_fraction) {
            return Err(Error::InvalidConfig("validation fraction must lie in [0, 1)".into()));
        }
        if self.pair_budget == 0 {
            return Err(Error::InvalidConfig("pair budget must be at least 1".into()));
        }
        self.integration.validate()
    }

    fn loss_context(&self) -> Result<LossContext> {
        Ok(LossContext {
            integrator: Integrator::new(self.integration)?,
            pair_budget: self.pair_budget,
            margin: self.margin,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub steps: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn best_valid_loss(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.epochs[e - 1].valid_loss)
    }
}

/// Resumable training state; serialising it mid-run and continuing gives the
/// same result as an uninterrupted run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trainer {
    config: TrainConfig,
    model: Model,
    optimizer: Optimizer,
    best: Model,
    bad_epochs: usize,
    log: TrainLog,
}

const VALID_SALT: u64 = u64::MAX;

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = Optimizer::new(config.optimizer, config.lr, model.params().len());
        Ok(Self {
            best: model.clone(),
            model,
            optimizer,
            config,
            bad_epochs: 0,
            log: TrainLog::default(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn current_model(&self) -> &Model {
        &self.model
    }

    pub fn best_model(&self) -> &Model {
        &self.best
    }

    pub fn epochs_done(&self) -> usize {
        self.log.epochs.len()
    }

    pub fn is_finished(&self) -> bool {
        self.log.stopped_early || self.epochs_done() >= self.config.max_epochs
    }

    pub fn into_result(self) -> (Model, TrainLog) {
        (self.best, self.log)
    }

    /// Runs until early stopping or the epoch limit.
    pub fn run(&mut self, train: &dyn TrainingSet, valid: Option<&dyn TrainingSet>) -> Result<()> {
        self.run_until(train, valid, usize::MAX)
    }

    /// Like [`Self::run`] but also stops once `epochs` epochs have been completed in total.
    pub fn run_until(
        &mut self,
        train: &dyn TrainingSet,
        valid: Option<&dyn TrainingSet>,
        epochs: usize,
    ) -> Result<()> {
        if train.is_empty() {
            return Err(Error::DegenerateInput("training set is empty".into()));
        }
        let ctx = self.config.loss_context()?;
        while !self.is_finished() && self.epochs_done() < epochs {
            self.epoch(train, valid, &ctx)?;
        }
        Ok(())
    }

    fn epoch(
        &mut self,
        train: &dyn TrainingSet,
        valid: Option<&dyn TrainingSet>,
        ctx: &LossContext,
    ) -> Result<()> {
        let epoch = self.epochs_done() + 1;
        let seed = self.config.seed;
        let diverged = |e: Error| match e {
            Error::NonFinite(msg) => Error::Diverged { epoch, msg },
            other => other,
        };

        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng_from_seed(mix_seed(seed, 2 * epoch as u64)));
        let loss_seed = mix_seed(seed, 2 * epoch as u64 + 1);

        let mut grad = vec![0.0; self.model.params().len()];
        let mut train_total = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            let model = &self.model;
            let kind = self.config.loss;
            let results: Vec<Result<(f64, Vec<f64>)>> = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = derived_rng(loss_seed, i as u64);
                    sample_loss(model, train, i, kind, ctx, &mut rng)
                })
                .collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for (&i, res) in batch.iter().zip(results) {
                let (value, mut upstream) = res.map_err(diverged)?;
                train_total += value;
                upstream.iter_mut().for_each(|u| *u *= scale);
                model.backward(train.features(i), &upstream, &mut grad)?;
            }
            self.optimizer.step(self.model.params_mut(), &grad);
            if self.model.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    msg: "parameters became non-finite".into(),
                });
            }
        }
        let train_loss = train_total / train.len() as f64;
        let valid_loss = match valid {
            Some(v) if !v.is_empty() => {
                mean_loss(&self.model, v, self.config.loss, ctx, seed).map_err(diverged)?
            }
            _ => train_loss,
        };
        if !valid_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                msg: format!("validation loss is {valid_loss}"),
            });
        }

        self.log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            valid_loss,
            steps: self.optimizer.steps(),
        });
        let improved = self
            .log
            .best_valid_loss()
            .is_none_or(|best| valid_loss < best);
        if improved {
            self.best = self.model.clone();
            self.log.best_epoch = Some(epoch);
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.config.patience {
                self.log.stopped_early = true;
            }
        }
        Ok(())
    }
}

fn sample_loss(
    model: &Model,
    set: &dyn TrainingSet,
    i: usize,
    kind: LossKind,
    ctx: &LossContext,
    rng: &mut crate::pl::PlRng,
) -> Result<(f64, Vec<f64>)> {
    let w = model.forward(set.features(i))?;
    let pref = set.preference(i)?;
    let out = evaluate_loss(kind, &pref, set.top_order(i), &w, ctx, rng)?;
    Ok((out.value, out.grad.into_vec()))
}

/// Mean loss of `model` over `set`; pair sampling is seeded per row so the
/// value does not depend on the epoch.
pub fn mean_loss(
    model: &Model,
    set: &dyn TrainingSet,
    kind: LossKind,
    ctx: &LossContext,
    seed: u64,
) -> Result<f64> {
    let salt = mix_seed(seed, VALID_SALT);
    let values: Vec<Result<f64>> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = derived_rng(salt, i as u64);
            sample_loss(model, set, i, kind, ctx, &mut rng).map(|r| r.0)
        })
        .collect();
    let mut total = 0.0;
    for v in values {
        total += v?;
    }
    Ok(total / set.len().max(1) as f64)
}

/// Trains `model` and returns the best-validation snapshot with its log.
pub fn train(
    model: Model,
    train_set: &dyn TrainingSet,
    valid_set: Option<&dyn TrainingSet>,
    config: &TrainConfig,
) -> Result<(Model, TrainLog)> {
    let mut trainer = Trainer::new(model, config.clone())?;
    if config.max_epochs > 0 {
        trainer.run(train_set, valid_set)?;
    }
    Ok(trainer.into_result())
}

pub fn loss_context(config: &TrainConfig) -> Result<LossContext> {
    config.loss_context()
}
