use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hopflab_cli::{output, run, CliError, Command, Experiment, RunOptions};

#[derive(Parser)]
#[command(name = "hopflab", version, about = "Truncated Schrödinger problems and their boundary behaviour")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve along the truncation ladder; writes solution.csv and diagnostics.json.
    Solve(Args),
    /// Normal derivatives over a grid of power-law potentials.
    HopfScan(Args),
    /// Classify boundary points against the singular set.
    Sigma(Args),
    /// Solve with measure data on the boundary and report the defect.
    MeasureBvp(Args),
    /// Compare the finite-difference solver with the ODE oracle.
    OracleCompare(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's "output").
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Random seed (overrides the config's "seed").
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(command: Command, args: Args) -> Result<(), CliError> {
    let exp = Experiment::load(&args.config)?;
    let options = RunOptions {
        threads: args.threads,
        seed: args.seed,
    };
    let outputs = run(command, &exp, &options)?;
    let dir = args
        .out
        .or_else(|| exp.config.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    for path in output::write_all(&dir, &outputs)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let (command, args) = match Cli::parse().command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::HopfScan(a) => (Command::HopfScan, a),
        Cmd::Sigma(a) => (Command::Sigma, a),
        Cmd::MeasureBvp(a) => (Command::MeasureBvp, a),
        Cmd::OracleCompare(a) => (Command::OracleCompare, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hopflab {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
