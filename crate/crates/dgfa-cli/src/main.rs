//! Experiment runner: builds a nested factor model family, synthesizes the
//! steady-state predictor and filter across growing output dimensions, and
//! emits CSV/plot data or a diagnostics report.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use commands::{cmd_diagnose, cmd_simulate, cmd_sweep, RunContext};
use config::{load_config, resolve_model};
use dgfa::linalg::Tolerances;

#[derive(Parser)]
#[command(
    name = "dgfa",
    version,
    about = "factor-model estimation sweeps and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic theory sweep over the truncation dimensions (CSV).
    Sweep(CommonArgs),
    /// Seeded Monte Carlo comparison of empirical and theoretical errors (CSV).
    Simulate(CommonArgs),
    /// Assumption checks and asymptotic diagnostics (text report).
    Diagnose(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides `output_path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress and verdict lines on stdout.
    #[arg(long)]
    quiet: bool,
}

fn build_context(args: &CommonArgs) -> Result<RunContext, String> {
    let config = load_config(&args.config).map_err(|e| e.to_string())?;
    let config_dir = args.config.parent().unwrap_or_else(|| Path::new("."));
    let family = resolve_model(&config, config_dir).map_err(|e| e.to_string())?;
    let tolerances = config
        .tolerances
        .as_ref()
        .map(|o| o.apply(Tolerances::default()))
        .unwrap_or_default();
    let seed = args.seed.unwrap_or(config.seed);
    Ok(RunContext {
        config,
        family,
        tolerances,
        seed,
        quiet: args.quiet,
    })
}

fn output_path(args: &CommonArgs, ctx: &RunContext) -> Result<PathBuf, String> {
    args.out
        .clone()
        .or_else(|| ctx.config.output_path.clone())
        .ok_or_else(|| "config error: no output path (set output_path or pass --out)".into())
}

fn run() -> i32 {
    let cli = Cli::parse();
    let args = match &cli.command {
        Command::Sweep(a) | Command::Simulate(a) | Command::Diagnose(a) => a,
    };

    let ctx = match build_context(args) {
        Ok(ctx) => ctx,
        Err(msg) => {
            eprintln!("{msg}");
            return 2;
        }
    };

    let result = match &cli.command {
        Command::Diagnose(_) => {
            let out = args.out.clone().or_else(|| ctx.config.output_path.clone());
            cmd_diagnose(&ctx, out.as_deref())
        }
        Command::Sweep(_) | Command::Simulate(_) => {
            let out = match output_path(args, &ctx) {
                Ok(path) => path,
                Err(msg) => {
                    eprintln!("{msg}");
                    return 2;
                }
            };
            match &cli.command {
                Command::Sweep(_) => cmd_sweep(&ctx, &out),
                Command::Simulate(_) => cmd_simulate(&ctx, &out),
                Command::Diagnose(_) => unreachable!(),
            }
        }
    };

    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("{msg}");
            3
        }
    }
}

fn main() {
    std::process::exit(run());
}
