//! `scaling`: wall-clock cost of training steps as the item count grows.

use std::path::PathBuf;

use clap::Args;
use plrank::experiments::{scaling_slope, time_training_steps, ScalingParams};
use serde::Serialize;

use super::require;
use crate::config::Resolver;
use crate::error::CliResult;
use crate::output::{to_csv, to_dat, OutputDir};

#[derive(Debug, Args)]
pub struct ScalingArgs {
    /// Item counts, comma separated [default: 100,1000,10000]
    #[arg(long, value_delimiter = ',')]
    n_items: Vec<usize>,
    /// Optimizer steps per timing [default: 1000]
    #[arg(long)]
    steps: Option<usize>,
    /// [default: 20]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [default: 1000]
    #[arg(long)]
    intervals: Option<usize>,
    /// [default: 4]
    #[arg(long)]
    partitions: Option<usize>,
    /// Largest cut position, which bounds the upper blocks [default: 10]
    #[arg(long)]
    cap: Option<usize>,
    /// Distinct preferences cycled through [default: 200]
    #[arg(long)]
    pool: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct ScalingSettings {
    n_items: Vec<usize>,
    params: ScalingParams,
}

#[derive(Debug, Serialize)]
struct Point {
    n_items: usize,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    points: &'a [Point],
    loglog_slope: Option<f64>,
}

pub fn run(a: ScalingArgs, r: Resolver) -> CliResult<()> {
    let d = ScalingParams::default();
    let s = ScalingSettings {
        n_items: r.list(a.n_items.clone(), "n-items", vec![100, 1000, 10_000])?,
        params: ScalingParams {
            steps: r.get(a.steps, "steps", d.steps)?,
            batch_size: r.get(a.batch_size, "batch-size", d.batch_size)?,
            intervals: r.get(a.intervals, "intervals", d.intervals)?,
            partitions: r.get(a.partitions, "partitions", d.partitions)?,
            cap: r.get(a.cap, "cap", d.cap)?,
            pool: r.get(a.pool, "pool", d.pool)?,
            seed: r.get(a.seed, "seed", d.seed)?,
        },
    };
    require(s.params.steps > 0 && s.params.batch_size > 0, "--steps and --batch-size must be positive")?;
    require(s.params.pool > 0 && s.params.intervals > 0, "--pool and --intervals must be positive")?;

    let mut points = Vec::new();
    for &n in &s.n_items {
        let seconds = time_training_steps(n, &s.params)?;
        eprintln!("N={n}: {seconds:.3}s for {} steps", s.params.steps);
        points.push(Point { n_items: n, seconds });
    }
    let slope = scaling_slope(&points.iter().map(|p| (p.n_items, p.seconds)).collect::<Vec<_>>());
    match slope {
        Some(v) => println!("log-log slope {v:.3}"),
        None => println!("log-log slope unavailable"),
    }

    let mut out = OutputDir::create(&a.out)?;
    out.write("scaling.csv", &to_csv(&points))?;
    out.write_json(
        "scaling.json",
        &Report {
            points: &points,
            loglog_slope: slope,
        },
    )?;
    let series = vec![(
        "n_items seconds".to_string(),
        points.iter().map(|p| (p.n_items as f64, p.seconds)).collect(),
    )];
    out.write("scaling.dat", &to_dat(&series))?;
    let seed = vec![s.params.seed];
    out.finish("scaling", &s, seed)
}
