use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinphase_cli::{cmd_evolve, cmd_field, cmd_sweep, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "spinphase", version, about = "Gravitomagnetic fields and spin phases under rotating drives")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory, overriding the one named in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Relative tolerance of the auxiliary-equation integrator.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the gravitomagnetic field and test-particle force on a grid.
    Field { config: PathBuf },
    /// Solve one scenario with both solvers and compare them.
    Evolve { config: PathBuf },
    /// Run a parameter sweep or the adiabatic-limit check.
    Sweep { config: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Invalid(format!("--tol must be a positive number, got {t}")));
        }
    }
    let opts = RunOptions { out: cli.out, tol: cli.tol, quiet: cli.quiet };
    match cli.command {
        Command::Field { config } => cmd_field(&config, &opts).map(|_| ()),
        Command::Evolve { config } => cmd_evolve(&config, &opts).map(|_| ()),
        Command::Sweep { config } => cmd_sweep(&config, &opts).map(|_| ()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
