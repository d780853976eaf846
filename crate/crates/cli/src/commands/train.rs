//! `train`: MLP scorer on an XMLC dataset with a learning-rate line search.

use std::path::{Path, PathBuf};

use clap::Args;
use plrank::data::{parse_xmlc, split_indices, Dataset, XmlcTrainingSet};
use plrank::losses::LossKind;
use plrank::models::{
    Model, MlpModel, OptimizerKind, Scorer, TrainConfig, Trainer, TrainingSet, DEFAULT_HIDDEN,
};
use plrank::pl::{mix_seed, rng_from_seed};
use serde::Serialize;

use super::{config_error, QuadArgs};
use crate::config::Resolver;
use crate::error::{CliError, CliResult};
use crate::output::{to_csv, OutputDir};

pub const LINE_SEARCH: [f64; 3] = [1e-4, 1e-3, 1e-2];
pub const MODEL_FILE: &str = "model.json";
const INIT_SALT: u64 = 11;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training file in XMLC sparse format (.gz accepted).
    train: PathBuf,
    /// Loss [default: pl-partition]
    #[arg(long)]
    loss: Option<LossKind>,
    #[command(flatten)]
    quad: QuadArgs,
    /// Learning rate; without it 1e-4, 1e-3 and 1e-2 are tried and the best validation loss wins.
    #[arg(long)]
    lr: Option<f64>,
    /// sgd, adagrad or adam [default: adam]
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    /// [default: 128]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [default: 20]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 3]
    #[arg(long)]
    patience: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Share of rows held out for validation [default: 0.25]
    #[arg(long)]
    valid_fraction: Option<f64>,
    /// Hidden units [default: 256]
    #[arg(long)]
    hidden: Option<usize>,
    /// Continue from the checkpoints in the output directory.
    #[arg(long)]
    resume: bool,
    /// Stop after this many epochs per learning rate, leaving checkpoints behind.
    #[arg(long, hide = true)]
    halt_after: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct TrainSettings {
    train: PathBuf,
    learning_rates: Vec<f64>,
    hidden: usize,
    config: TrainConfig,
}

#[derive(Debug, Serialize)]
struct LogRow {
    lr: f64,
    epoch: usize,
    train_loss: f64,
    valid_loss: f64,
    steps: u64,
}

#[derive(Debug, Serialize)]
struct SearchRow {
    lr: f64,
    best_epoch: Option<usize>,
    best_valid_loss: f64,
    epochs: usize,
    selected: bool,
}

fn resolve(a: &TrainArgs, r: &Resolver) -> CliResult<TrainSettings> {
    let d = TrainConfig::default();
    let config = TrainConfig {
        batch_size: r.get(a.batch_size, "batch-size", d.batch_size)?,
        optimizer: r.get(a.optimizer, "optimizer", d.optimizer)?,
        lr: d.lr,
        max_epochs: r.get(a.epochs, "epochs", d.max_epochs)?,
        patience: r.get(a.patience, "patience", d.patience)?,
        valid_fraction: r.get(a.valid_fraction, "valid-fraction", d.valid_fraction)?,
        loss: r.get(a.loss, "loss", d.loss)?,
        integration: a.quad.resolve(r, plrank::quadrature::DEFAULT_INTERVALS)?,
        seed: r.get(a.seed, "seed", d.seed)?,
        ..d
    };
    let learning_rates = match r.opt(a.lr, "lr")? {
        Some(lr) => vec![lr],
        None => LINE_SEARCH.to_vec(),
    };
    for &lr in &learning_rates {
        TrainConfig { lr, ..config.clone() }.validate().map_err(config_error)?;
    }
    if config.loss == LossKind::PlTopK {
        return Err(CliError::Config("pl-topk needs ordered labels, which XMLC data lacks".into()));
    }
    let hidden = r.get(a.hidden, "hidden", DEFAULT_HIDDEN)?;
    if hidden == 0 {
        return Err(CliError::Config("--hidden must be at least 1".into()));
    }
    Ok(TrainSettings {
        train: a.train.clone(),
        learning_rates,
        hidden,
        config,
    })
}

fn checkpoint_name(lr: f64) -> String {
    format!("checkpoint-lr{lr:e}.json")
}

fn load_checkpoint(path: &Path, expected: &TrainConfig, init: &Model) -> CliResult<Trainer> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path, e.into()))?;
    let trainer: Trainer =
        serde_json::from_str(&text).map_err(|e| CliError::data(path, e.into()))?;
    if trainer.config() != expected {
        return Err(CliError::Config(format!(
            "{} was written with different settings",
            path.display()
        )));
    }
    let same_shape = trainer.current_model().n_inputs() == init.n_inputs()
        && trainer.current_model().n_outputs() == init.n_outputs()
        && trainer.current_model().params().len() == init.params().len();
    if !same_shape {
        return Err(CliError::Config(format!("{} holds a differently shaped model", path.display())));
    }
    Ok(trainer)
}

pub fn run(a: TrainArgs, r: Resolver) -> CliResult<()> {
    let s = resolve(&a, &r)?;
    let ds: Dataset = parse_xmlc(&s.train).map_err(|e| CliError::data(&s.train, e))?;
    let (train_rows, valid_rows) = split_indices(ds.len(), s.config.valid_fraction, s.config.seed);
    let train_set = XmlcTrainingSet::from_rows(&ds, train_rows);
    let valid_set = XmlcTrainingSet::from_rows(&ds, valid_rows);
    if train_set.is_empty() {
        return Err(CliError::Data {
            path: s.train.display().to_string(),
            source: plrank::Error::DegenerateInput("no training row has a usable label set".into()),
        });
    }
    let valid: Option<&dyn TrainingSet> = if valid_set.is_empty() { None } else { Some(&valid_set) };

    let mut out = OutputDir::create(&a.out)?;
    let init = Model::Mlp(MlpModel::new(
        ds.n_features,
        ds.n_labels,
        s.hidden,
        &mut rng_from_seed(mix_seed(s.config.seed, INIT_SALT)),
    ));

    let mut trainers = Vec::new();
    for &lr in &s.learning_rates {
        let config = TrainConfig { lr, ..s.config.clone() };
        let ckpt = out.path(&checkpoint_name(lr));
        let mut trainer = if a.resume && ckpt.exists() {
            load_checkpoint(&ckpt, &config, &init)?
        } else {
            Trainer::new(init.clone(), config).map_err(config_error)?
        };
        while !trainer.is_finished() && a.halt_after.is_none_or(|h| trainer.epochs_done() < h) {
            trainer.run_until(&train_set, valid, trainer.epochs_done() + 1)?;
            let rec = trainer.log().epochs.last().expect("an epoch was recorded");
            eprintln!(
                "lr={lr:e} epoch {}: train {:.5} valid {:.5}",
                rec.epoch, rec.train_loss, rec.valid_loss
            );
            out.write_json(&checkpoint_name(lr), &trainer)?;
        }
        trainers.push(trainer);
    }

    let mut log_rows = Vec::new();
    for t in &trainers {
        for e in &t.log().epochs {
            log_rows.push(LogRow {
                lr: t.config().lr,
                epoch: e.epoch,
                train_loss: e.train_loss,
                valid_loss: e.valid_loss,
                steps: e.steps,
            });
        }
    }
    out.write("train_log.csv", &to_csv(&log_rows))?;

    if trainers.iter().all(Trainer::is_finished) {
        let best = trainers
            .iter()
            .enumerate()
            .min_by(|x, y| {
                let lx = x.1.log().best_valid_loss().unwrap_or(f64::INFINITY);
                let ly = y.1.log().best_valid_loss().unwrap_or(f64::INFINITY);
                lx.total_cmp(&ly).then(x.0.cmp(&y.0))
            })
            .map(|(i, _)| i)
            .expect("at least one learning rate");
        let search: Vec<SearchRow> = trainers
            .iter()
            .enumerate()
            .map(|(i, t)| SearchRow {
                lr: t.config().lr,
                best_epoch: t.log().best_epoch,
                best_valid_loss: t.log().best_valid_loss().unwrap_or(f64::NAN),
                epochs: t.epochs_done(),
                selected: i == best,
            })
            .collect();
        eprintln!("selected lr={:e}", trainers[best].config().lr);
        out.write("line_search.csv", &to_csv(&search))?;
        out.write_json(MODEL_FILE, trainers[best].best_model())?;
    } else {
        eprintln!("halted; rerun with --resume to continue");
    }
    let seed = vec![s.config.seed];
    out.finish("train", &s, seed)
}
