//! `simulate`: the synthetic recovery grid.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use plrank::data::write_xmlc;
use plrank::datagen::{SimConfig, SimDataset};
use plrank::experiments::{run_simulation_on, SimTrainParams};
use plrank::losses::LossKind;
use plrank::models::OptimizerKind;
use serde::Serialize;

use super::{config_error, require, QuadArgs};
use crate::config::Resolver;
use crate::error::CliResult;
use crate::output::{to_csv, to_dat, OutputDir};

pub const DEFAULT_INTERVALS: usize = 300;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Item counts N, comma separated [default: 100]
    #[arg(long, value_delimiter = ',')]
    n_items: Vec<usize>,
    /// Sample counts n, comma separated [default: 1000]
    #[arg(long, value_delimiter = ',')]
    n_samples: Vec<usize>,
    /// Partitions per preference [default: 4]
    #[arg(long)]
    partitions: Option<usize>,
    /// Largest cut position [default: 500]
    #[arg(long)]
    cap: Option<usize>,
    /// Losses, comma separated [default: pl-partition]
    #[arg(long, value_delimiter = ',')]
    loss: Vec<LossKind>,
    /// Seeds, comma separated [default: 0]
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[command(flatten)]
    quad: QuadArgs,
    /// Learning rate [default: 0.1]
    #[arg(long)]
    lr: Option<f64>,
    /// sgd, adagrad or adam [default: adagrad]
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    /// [default: 20]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    epochs: Option<usize>,
    /// Epochs without improvement before stopping [default: 2]
    #[arg(long)]
    patience: Option<usize>,
    /// Also write each generated corpus in XMLC format.
    #[arg(long)]
    emit_data: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct SimulateSettings {
    n_items: Vec<usize>,
    n_samples: Vec<usize>,
    partitions: usize,
    cap: usize,
    losses: Vec<LossKind>,
    seeds: Vec<u64>,
    train: SimTrainParams,
    emit_data: bool,
}

#[derive(Debug, Serialize)]
struct Row {
    n_items: usize,
    n_samples: usize,
    seed: u64,
    loss: String,
    mse: f64,
    epochs: usize,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    n_items: usize,
    n_samples: usize,
    loss: String,
    mean_mse: f64,
    seeds: usize,
}

fn resolve(a: &SimulateArgs, r: &Resolver) -> CliResult<SimulateSettings> {
    let defaults = SimTrainParams::default();
    let s = SimulateSettings {
        n_items: r.list(a.n_items.clone(), "n-items", vec![100])?,
        n_samples: r.list(a.n_samples.clone(), "n-samples", vec![1000])?,
        partitions: r.get(a.partitions, "partitions", 4)?,
        cap: r.get(a.cap, "cap", 500)?,
        losses: r.list(a.loss.clone(), "loss", vec![LossKind::PlPartition])?,
        seeds: r.list(a.seed.clone(), "seed", vec![0])?,
        train: SimTrainParams {
            epochs: r.get(a.epochs, "epochs", defaults.epochs)?,
            batch_size: r.get(a.batch_size, "batch-size", defaults.batch_size)?,
            optimizer: r.get(a.optimizer, "optimizer", defaults.optimizer)?,
            lr: r.get(a.lr, "lr", defaults.lr)?,
            patience: r.get(a.patience, "patience", defaults.patience)?,
            integration: a.quad.resolve(r, DEFAULT_INTERVALS)?,
        },
        emit_data: a.emit_data,
    };
    require(s.n_samples.iter().all(|&n| n > 0), "--n-samples must be positive")?;
    require(s.train.epochs > 0, "--epochs must be at least 1")?;
    for &n in &s.n_items {
        sim_config(&s, n, 1, 0).validate().map_err(config_error)?;
    }
    Ok(s)
}

fn sim_config(s: &SimulateSettings, n_items: usize, n_samples: usize, seed: u64) -> SimConfig {
    SimConfig {
        n_items,
        n_samples,
        partitions: s.partitions,
        cap: s.cap,
        seed,
    }
}

pub fn run(a: SimulateArgs, r: Resolver) -> CliResult<()> {
    let s = resolve(&a, &r)?;
    let mut out = OutputDir::create(&a.out)?;
    let mut rows = Vec::new();
    for &n_items in &s.n_items {
        for &n_samples in &s.n_samples {
            for &seed in &s.seeds {
                let data = SimDataset::generate(&sim_config(&s, n_items, n_samples, seed))?;
                if s.emit_data {
                    let mut text = Vec::new();
                    write_xmlc(&data.to_xmlc()?, &mut text)?;
                    let name = format!("data-N{n_items}-n{n_samples}-seed{seed}.txt");
                    out.write(&name, &String::from_utf8(text).expect("xmlc text is utf-8"))?;
                }
                for &loss in &s.losses {
                    let o = run_simulation_on(&data, loss, &s.train)?;
                    eprintln!("N={n_items} n={n_samples} seed={seed} {loss}: mse={:.4e}", o.mse);
                    rows.push(Row {
                        n_items,
                        n_samples,
                        seed,
                        loss: loss.name().to_string(),
                        mse: o.mse,
                        epochs: o.epochs_run,
                    });
                }
            }
        }
    }

    let mut groups: BTreeMap<(usize, usize, String), Vec<f64>> = BTreeMap::new();
    for row in &rows {
        groups
            .entry((row.n_items, row.n_samples, row.loss.clone()))
            .or_default()
            .push(row.mse);
    }
    let summary: Vec<SummaryRow> = groups
        .iter()
        .map(|((n_items, n_samples, loss), v)| SummaryRow {
            n_items: *n_items,
            n_samples: *n_samples,
            loss: loss.clone(),
            mean_mse: v.iter().sum::<f64>() / v.len() as f64,
            seeds: v.len(),
        })
        .collect();
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &summary {
        series
            .entry(format!("loss={} n_items={}", row.loss, row.n_items))
            .or_default()
            .push((row.n_samples as f64, row.mean_mse));
    }

    out.write("results.csv", &to_csv(&rows))?;
    out.write_json("results.json", &rows)?;
    out.write("summary.csv", &to_csv(&summary))?;
    out.write("mse.dat", &to_dat(&series.into_iter().collect::<Vec<_>>()))?;
    let seeds = s.seeds.clone();
    out.finish("simulate", &s, seeds)
}
