//! `evaluate`: ranking metrics of a scorer on a test set.

use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use plrank::data::{parse_xmlc, Dataset};
use plrank::metrics::{
    estimate_propensities, evaluate_rankings, MetricReport, DEFAULT_KS, DEFAULT_PROPENSITY_A,
    DEFAULT_PROPENSITY_B,
};
use plrank::models::{Model, Scorer};
use plrank::pl::{derived_rng, mix_seed};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::require;
use crate::config::Resolver;
use crate::error::{CliError, CliResult};
use crate::output::{to_dat, OutputDir};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreSource {
    Model,
    /// Relevant labels score 1, the rest 0.
    Oracle,
    Random,
}

impl FromStr for ScoreSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "model" => Ok(ScoreSource::Model),
            "oracle" => Ok(ScoreSource::Oracle),
            "random" => Ok(ScoreSource::Random),
            other => Err(format!("unknown scorer `{other}` (model, oracle, random)")),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Test file in XMLC sparse format (.gz accepted).
    test: PathBuf,
    /// Model written by `train`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// model, oracle or random [default: model]
    #[arg(long)]
    scorer: Option<ScoreSource>,
    /// Training file for label frequencies; the test set is used without it.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Cut-offs, comma separated [default: 1,3,5,10]
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// [default: 0.55]
    #[arg(long)]
    propensity_a: Option<f64>,
    /// [default: 1.5]
    #[arg(long)]
    propensity_b: Option<f64>,
    /// Seed of the random scorer [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct EvaluateSettings {
    test: PathBuf,
    model: Option<PathBuf>,
    scorer: ScoreSource,
    train: Option<PathBuf>,
    ks: Vec<usize>,
    propensity_a: f64,
    propensity_b: f64,
    seed: u64,
}

fn resolve(a: &EvaluateArgs, r: &Resolver) -> CliResult<EvaluateSettings> {
    let s = EvaluateSettings {
        test: a.test.clone(),
        model: a.model.clone(),
        scorer: a.scorer.unwrap_or(ScoreSource::Model),
        train: a.train.clone(),
        ks: r.list(a.k.clone(), "k", DEFAULT_KS.to_vec())?,
        propensity_a: r.get(a.propensity_a, "propensity-a", DEFAULT_PROPENSITY_A)?,
        propensity_b: r.get(a.propensity_b, "propensity-b", DEFAULT_PROPENSITY_B)?,
        seed: r.get(a.seed, "seed", 0)?,
    };
    require(s.ks.iter().all(|&k| k > 0), "--k values must be positive")?;
    require(
        s.scorer != ScoreSource::Model || s.model.is_some(),
        "--model is required unless --scorer is oracle or random",
    )?;
    Ok(s)
}

fn load_model(path: &PathBuf) -> CliResult<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path, e.into()))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(path, e.into()))
}

fn score(s: &EvaluateSettings, test: &Dataset) -> CliResult<Vec<Vec<f64>>> {
    match s.scorer {
        ScoreSource::Model => {
            let path = s.model.as_ref().expect("checked in resolve");
            let model = load_model(path)?;
            if model.n_outputs() != test.n_labels || model.n_inputs() != test.n_features {
                return Err(CliError::Config(format!(
                    "model maps {} features to {} labels, test set has {} and {}",
                    model.n_inputs(),
                    model.n_outputs(),
                    test.n_features,
                    test.n_labels
                )));
            }
            test.samples
                .par_iter()
                .map(|x| model.forward(&x.features).map_err(CliError::from))
                .collect()
        }
        ScoreSource::Oracle => Ok(test
            .samples
            .iter()
            .map(|x| {
                let mut v = vec![0.0; test.n_labels];
                x.labels.iter().for_each(|&l| v[l as usize] = 1.0);
                v
            })
            .collect()),
        ScoreSource::Random => {
            let seed = mix_seed(s.seed, 5);
            Ok((0..test.len())
                .map(|i| {
                    let mut rng = derived_rng(seed, i as u64);
                    (0..test.n_labels).map(|_| rng.gen::<f64>()).collect()
                })
                .collect())
        }
    }
}

pub fn run(a: EvaluateArgs, r: Resolver) -> CliResult<()> {
    let s = resolve(&a, &r)?;
    let test = parse_xmlc(&s.test).map_err(|e| CliError::data(&s.test, e))?;
    let prop_source = match &s.train {
        Some(p) => {
            let train = parse_xmlc(p).map_err(|e| CliError::data(p, e))?;
            if train.n_labels != test.n_labels {
                return Err(CliError::Config(format!(
                    "train set has {} labels, test set {}",
                    train.n_labels, test.n_labels
                )));
            }
            train
        }
        None => test.clone(),
    };
    let prop = estimate_propensities(&prop_source, s.propensity_a, s.propensity_b);
    let scores = score(&s, &test)?;
    let relevant: Vec<Vec<u32>> = test.samples.iter().map(|x| x.labels.clone()).collect();
    let report: MetricReport = evaluate_rankings(&scores, &relevant, &prop, &s.ks);

    for row in &report.rows {
        println!("{:<7} @{:<3} {:.4}", row.metric, row.k, row.value);
    }
    let mut families: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for row in &report.rows {
        match families.last_mut() {
            Some((name, pts)) if *name == row.metric => pts.push((row.k as f64, row.value)),
            _ => families.push((row.metric.clone(), vec![(row.k as f64, row.value)])),
        }
    }

    let mut out = OutputDir::create(&a.out)?;
    out.write("metrics.csv", &report.to_csv())?;
    out.write_json("metrics.json", &report)?;
    out.write("metrics.dat", &to_dat(&families))?;
    let seed = vec![s.seed];
    out.finish("evaluate", &s, seed)
}
