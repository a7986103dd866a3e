use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fdi_grid::io::{error_record, exit_code, parse_config, run_command, Command, Overrides, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Simulate,
    Equilibrium,
    Bruteforce,
    Train,
    Evaluate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Equilibrium => Command::Equilibrium,
            Cmd::Bruteforce => Command::Bruteforce,
            Cmd::Train => Command::Train,
            Cmd::Evaluate => Command::Evaluate,
        }
    }
}

/// Droop-coefficient attack experiments on a swing-equation grid model.
///
/// Prints a JSON record to stdout on success and to stderr on failure.
#[derive(Debug, Parser)]
#[command(name = "fdi-grid", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// TOML run configuration; the shipped defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `ppo.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint to evaluate.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Overrides `ppo.total_env_steps`.
    #[arg(long)]
    total_steps: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = Command::from(cli.command);
    let overrides = Overrides {
        seed: cli.seed,
        total_steps: cli.total_steps,
        out: cli.out,
        checkpoint: cli.checkpoint,
    };
    let result = match &cli.config {
        Some(path) => parse_config(path),
        None => Ok(RunConfig::with_defaults()),
    }
    .and_then(|config| run_command(command, &config, &overrides));

    match result {
        Ok(report) => {
            println!("{}", report.to_record());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(Some(command), &e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
