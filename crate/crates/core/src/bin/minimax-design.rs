use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use minimax_design::cli::{self, CliOptions, Command};

#[derive(Parser)]
#[command(version, about = "Minimax random designs for weighted least squares")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed override for simulations
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Build minimax designs and write densities, descriptors and curves
    Design,
    /// Evaluate asymptotic risks over designs and noise variances
    Risk,
    /// Run a Monte Carlo experiment
    Simulate,
    /// Write plot-ready figure tables
    Figures,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Design => Command::Design,
        Cmd::Risk => Command::Risk,
        Cmd::Simulate => Command::Simulate,
        Cmd::Figures => Command::Figures,
    };
    let opts = CliOptions { config: args.config, out: args.out, seed: args.seed, quiet: args.quiet };
    let result = cli::run(command, &opts);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
