//! `fblmac` command-line front end.

mod commands;
mod config;
mod error;
mod reproduce;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fblmac::approx::FitNorm;
use fblmac::RelayArm;

use commands::{Context, FitArgs, Output};
use config::{parse_scenario, Scenario};
use error::{CliError, CliResult};
use reproduce::Figure;

#[derive(Debug, Parser)]
#[command(name = "fblmac", version, about = "Finite-blocklength throughput and stability for two-source relay MAC protocols")]
struct Cli {
    /// Scenario file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps and dataset generation.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Overrides the simulation seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relay-arm form for relay-side batching.
    #[arg(long, global = true, value_enum)]
    relay_arm: Option<ArmArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ArmArg {
    Unweighted,
    BatchWeighted,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    Squared,
    Absolute,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Throughput of every candidate (k, L) plus the optimum.
    Optimize,
    /// Throughput at the configured (k, L).
    Throughput,
    /// Closed-form stability verdict for the configured traffic.
    Stability,
    /// Slot-level simulation compared with the closed-form verdict.
    Simulate,
    /// Evaluate along the configured sweep axis.
    Sweep,
    /// Regenerate a figure dataset.
    Reproduce {
        /// fig2, fig3, fig4a, fig4b, fig6a or fig6b.
        figure: String,
    },
    /// Fit the surrogate constants.
    Fit {
        #[arg(long, value_enum, default_value = "squared")]
        norm: NormArg,
        /// Fit the linear intercept instead of pinning it at 0.5.
        #[arg(long)]
        free_intercept: bool,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
}

fn load(path: Option<&Path>) -> CliResult<Scenario> {
    let path = path.ok_or_else(|| CliError::Input("this command needs --config <FILE>".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_scenario(&text)?)
}

fn execute(cli: &Cli) -> CliResult<Output> {
    let ctx = Context {
        jobs: cli.jobs.map(|j| j as usize),
        seed: cli.seed,
        relay_arm: cli.relay_arm.map(|a| match a {
            ArmArg::Unweighted => RelayArm::Unweighted,
            ArmArg::BatchWeighted => RelayArm::BatchWeighted,
        }),
    };
    let scenario = || load(cli.config.as_deref());
    match &cli.command {
        Command::Optimize => commands::optimize(&scenario()?, &ctx),
        Command::Throughput => commands::throughput(&scenario()?, &ctx),
        Command::Stability => commands::stability(&scenario()?, &ctx),
        Command::Simulate => commands::simulate(&scenario()?, &ctx),
        Command::Sweep => commands::sweep(&scenario()?, &ctx),
        Command::Reproduce { figure } => {
            let fig = Figure::parse(figure)?;
            let arm = ctx.relay_arm.unwrap_or_default();
            let text = ctx.pool()?.install(|| reproduce::render(fig, arm))?;
            Ok(Output { text, status: 0 })
        }
        Command::Fit { norm, free_intercept, step } => commands::fit(&FitArgs {
            norm: match norm {
                NormArg::Squared => FitNorm::Squared,
                NormArg::Absolute => FitNorm::Absolute,
            },
            free_intercept: *free_intercept,
            step: *step,
        }),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = execute(&cli).and_then(|output| {
        emit(cli.out.as_deref(), &output.text)?;
        Ok(output.status)
    });
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(status) => {
            eprintln!("error: {}", CliError::Indeterminate);
            ExitCode::from(status as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
