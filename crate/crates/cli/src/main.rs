use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use dynsym_lab::config::{self, LoadedConfig};
use dynsym_lab::{commands, output_dir, write_outcome, CliError, Outcome};

#[derive(Parser)]
#[command(name = "dynsym-lab", version, about = "Dynamical-symmetry discovery and dynamics on small lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenoperators of [H, ·] among single-site operators -> symmetries.json
    Find(RunArgs),
    /// Exact time series of the configured observables -> <name>.csv, metrics.json
    Evolve(RunArgs),
    /// Charges from every symmetry pair -> theorem1.json
    Theorem1(RunArgs),
    /// Rebuild H from Cartan charges and check root eigenvalues -> theorem2.json
    Theorem2(RunArgs),
    /// Compare a symmetry-broken config with its counterpart -> demo.json
    Demo(DemoArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides both finder tolerances.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct DemoArgs {
    /// Two configs: `--config a.json --config b.json` or `--config a.json b.json`.
    #[arg(long, action = ArgAction::Append, num_args = 1..=2, required = true)]
    config: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
}

fn check_tol(tol: Option<f64>) -> Result<(), CliError> {
    match tol {
        Some(t) if !(t.is_finite() && t > 0.0) => Err(CliError::Config(format!("--tol must be positive, got {t}"))),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (outcome, dir) = match cli.command {
        Command::Demo(args) => {
            check_tol(args.tol)?;
            if args.config.len() != 2 {
                return Err(CliError::Config(format!("demo needs two configs, got {}", args.config.len())));
            }
            let a = config::load(&args.config[0])?;
            let b = config::load(&args.config[1])?;
            let dir = output_dir(args.out.as_deref(), &a.config)?;
            (commands::cmd_demo([&a, &b], args.tol)?, dir)
        }
        Command::Find(args) => single(args, commands::cmd_find)?,
        Command::Theorem1(args) => single(args, commands::cmd_theorem1)?,
        Command::Evolve(args) => single(args, |l, _| commands::cmd_evolve(l))?,
        Command::Theorem2(args) => single(args, |l, _| commands::cmd_theorem2(l))?,
    };
    write_outcome(&dir, &outcome)
}

fn single(
    args: RunArgs,
    exec: fn(&LoadedConfig, Option<f64>) -> Result<Outcome, CliError>,
) -> Result<(Outcome, PathBuf), CliError> {
    check_tol(args.tol)?;
    let loaded = config::load(&args.config)?;
    let dir = output_dir(args.out.as_deref(), &loaded.config)?;
    Ok((exec(&loaded, args.tol)?, dir))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dynsym-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
