//! `plrank` command-line front end.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{ConfigFile, Resolver};
use crate::error::{CliError, EXIT_CONFIG, EXIT_OK};

const CONFIG_HELP: &str = "\
Config file (--config): one `key = value` per line, `#` starts a comment.
Keys are long flag names without the leading `--`, e.g.

    n-items = 100,1000
    loss = pl-partition,pl-lb
    intervals = 300
    lr = 0.1

Underscores are accepted in place of dashes. Flags given on the command line
override the file, and the file overrides built-in defaults.

Exit codes: 0 success, 1 config error, 2 data error, 3 property failure.";

#[derive(Debug, Parser)]
#[command(name = "plrank", version, about = "Plackett-Luce ranking losses for partitioned preferences", after_help = CONFIG_HELP)]
struct Cli {
    /// Settings file in `key = value` form.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit free parameters on synthetic partitioned preferences and report MSE.
    Simulate(commands::simulate::SimulateArgs),
    /// Train an MLP scorer on an XMLC dataset.
    Train(commands::train::TrainArgs),
    /// Score a test set and write ranking metrics.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Run the likelihood and gradient property checks.
    Verify(commands::verify::VerifyArgs),
    /// Time training steps across item counts.
    Scaling(commands::scaling::ScalingArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))?;
    }
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let r = Resolver::new(file.as_ref());
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(a, r),
        Command::Train(a) => commands::train::run(a, r),
        Command::Evaluate(a) => commands::evaluate::run(a, r),
        Command::Verify(a) => commands::verify::run(a, r),
        Command::Scaling(a) => commands::scaling::run(a, r),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
