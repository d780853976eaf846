//! `verify`: randomised likelihood and gradient checks.

use std::path::PathBuf;

use clap::Args;
use plrank::verify::{run_verify, VerifyConfig};

use super::{require, QuadArgs};
use crate::config::Resolver;
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Random instances for the oracle, gradient and bound checks [default: 200]
    #[arg(long)]
    instances: Option<usize>,
    /// Random instances for the convergence-order probe [default: 20]
    #[arg(long)]
    probe_instances: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    quad: QuadArgs,
    /// Negate the analytic gradient; the gradient check must then fail.
    #[arg(long, hide = true)]
    inject_wrong_sign: bool,
    /// Optional output directory for a JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(a: VerifyArgs, r: Resolver) -> CliResult<()> {
    let d = VerifyConfig::default();
    let cfg = VerifyConfig {
        instances: r.get(a.instances, "instances", d.instances)?,
        probe_instances: r.get(a.probe_instances, "probe-instances", d.probe_instances)?,
        seed: r.get(a.seed, "seed", d.seed)?,
        integration: a.quad.resolve(&r, d.integration.intervals)?,
        flip_gradient_sign: a.inject_wrong_sign,
        ..d
    };
    require(cfg.instances > 0 && cfg.probe_instances > 0, "instance counts must be positive")?;
    let checks = run_verify(&cfg)?;
    for c in &checks {
        println!(
            "{} {:<28} worst={:.3e} tol={:.1e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tolerance,
            c.detail
        );
    }
    if let Some(dir) = &a.out {
        let mut out = OutputDir::create(dir)?;
        out.write_json("verify.json", &checks)?;
        out.finish("verify", &cfg, vec![cfg.seed])?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Property(failed.join(", ")))
    }
}
