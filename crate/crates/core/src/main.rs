use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use whichway::config::{Format, RunConfig};
use whichway::pipeline::{run, write_output, Command};

/// Bohmian trajectories and momentum disturbance in a two-slit interferometer.
#[derive(Parser, Debug)]
#[command(name = "whichway", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// TOML run configuration; defaults reproduce the reference apparatus.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory (overrides output.directory).
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Detector RNG seed (overrides detector.seed).
    #[arg(long)]
    seed: Option<u64>,

    /// Override one key, e.g. `--set trajectory.n_per_slit=50`.
    #[arg(long = "set", value_name = "BLOCK.KEY=VALUE")]
    overrides: Vec<String>,
}

fn execute(cli: Cli) -> whichway::Result<Vec<PathBuf>> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut config = base.with_overrides(&cli.overrides)?;
    if let Some(dir) = cli.out {
        config.output.directory = dir;
    }
    if let Some(format) = cli.format {
        config.output.format = format;
    }
    if let Some(seed) = cli.seed {
        config.detector.seed = seed;
    }
    let output = run(cli.command, &config)?;
    write_output(&output, &config.output.directory, config.output.format)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("whichway: {e}");
            ExitCode::FAILURE
        }
    }
}
