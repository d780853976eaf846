//! Subcommand implementations.

pub mod evaluate;
pub mod scaling;
pub mod simulate;
pub mod train;
pub mod verify;

use clap::Args;
use plrank::{IntegrationConfig, Centering};

use crate::config::Resolver;
use crate::error::{CliError, CliResult};

/// Quadrature flags shared by several commands.
#[derive(Debug, Args)]
pub struct QuadArgs {
    /// Midpoint-rule intervals T.
    #[arg(long)]
    pub intervals: Option<usize>,
    /// Fixed centring constant c; without it the shift adapts per block.
    #[arg(long, allow_hyphen_values = true)]
    pub shift_c: Option<f64>,
}

impl QuadArgs {
    pub fn resolve(&self, r: &Resolver, default_intervals: usize) -> CliResult<IntegrationConfig> {
        let intervals = r.get(self.intervals, "intervals", default_intervals)?;
        let mut cfg = IntegrationConfig::default().with_intervals(intervals);
        if let Some(c) = r.opt(self.shift_c, "shift-c")? {
            cfg.centering = Centering::Fixed(c);
        }
        cfg.validate().map_err(config_error)?;
        Ok(cfg)
    }
}

pub fn config_error(e: plrank::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn require(cond: bool, msg: &str) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(msg.to_string()))
    }
}
