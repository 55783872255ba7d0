//! Experiment runner. Each subcommand reproduces one experiment, writing CSV
//! files and a summary under the output directory.
//!
//! Exit codes: 0 on success, 2 when `--check` finds a tolerance miss,
//! 64 on usage/config errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use plaim::experiments::{
    parse_config, resolve_config, run_experiment, CliError, ExperimentKind,
};

#[derive(Parser, Debug)]
#[command(
    name = "plaim",
    about = "Optimization laboratory for PL landscapes: estimation, dynamics and rate experiments",
    disable_help_subcommand = true
)]
struct Cli {
    /// Experiment to run: fig1-table, fig2-sweep, fig4-valley, fig5-bounds,
    /// fig7-sweep-cont, hard-instance, envelopes, lemma-suite
    experiment: Option<String>,

    /// JSON config file; command-line flags take precedence over its fields
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed for every randomized component
    #[arg(long)]
    seed: Option<u64>,

    /// One-dimensional grid budget (two-dimensional scans use 10x)
    #[arg(long)]
    grid_resolution: Option<usize>,

    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,

    /// Verify the experiment's acceptance tolerances; exit 2 on a miss
    #[arg(long)]
    check: bool,

    /// List the available experiments and exit
    #[arg(long)]
    list: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if cli.list {
        for kind in ExperimentKind::ALL {
            println!("{}", kind.as_str());
        }
        return ExitCode::SUCCESS;
    }

    if let Ok(threads) = std::env::var("PLAIM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }

    match run(cli) {
        Ok(check_failures) if check_failures.is_empty() => ExitCode::SUCCESS,
        Ok(check_failures) => {
            for failure in &check_failures {
                eprintln!("check failed: {failure}");
            }
            ExitCode::from(2)
        }
        Err(CliError::UsageError(msg)) | Err(CliError::ConfigError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(64)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    let file = match &cli.config {
        Some(path) => Some(parse_config(path)?),
        None => None,
    };
    let cfg = resolve_config(
        file,
        cli.experiment.as_deref(),
        cli.seed,
        cli.grid_resolution,
        cli.out,
        cli.check,
    )?;
    let outcome = run_experiment(&cfg)?;
    print!("{}", outcome.summary);
    Ok(outcome.check_failures)
}
