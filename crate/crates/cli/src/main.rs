use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mcmo_cli::config::Method;
use mcmo_cli::runner::{run_experiment, sweep_convergence, sweep_timing};
use mcmo_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "mcmo", version, about = "Monte-Carlo multilevel optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured method once.
    Run(Common),
    /// Wall time and solve counts over norm-chain depths and sample counts.
    SweepTiming(Common),
    /// Leader objective per iteration for several N or alpha values.
    SweepConvergence(Common),
    /// Write the reference solution of the configured problem.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel workers for sweeps.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn load(args: &Common) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => {
            let s = run_experiment(&load(&a)?)?;
            println!("{} ({}): leader value {}", s.problem, s.method, s.leader_value);
            if let Some(e) = s.relative_error {
                println!("relative error {e:.6}");
            }
        }
        Command::Oracle(a) => {
            let mut cfg = load(&a)?;
            cfg.method = Method::Oracle;
            let s = run_experiment(&cfg)?;
            println!(
                "{}: reference point {:?}, leader value {}",
                s.problem, s.x_star, s.leader_value
            );
        }
        Command::SweepTiming(a) => {
            let cfg = load(&a)?;
            let rows = sweep_timing(&cfg, a.workers)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            println!(
                "{} cells written to {}, {failed} failed",
                rows.len(),
                cfg.out.join("timing.csv").display()
            );
        }
        Command::SweepConvergence(a) => {
            let cfg = load(&a)?;
            let rows = sweep_convergence(&cfg, a.workers)?;
            println!(
                "{} runs written to {}",
                rows.len(),
                cfg.out.join("convergence.csv").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
