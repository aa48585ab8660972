use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use klausmeier_cli::commands::{self, RunContext};
use klausmeier_cli::config::{parse_config, RunConfig};

/// Spectral-Galerkin simulator and estimate checks for the nonlocal
/// Klausmeier plant–water model.
///
/// Exit status: 0 when every check of the command passes, 1 when a check
/// fails, 2 on invalid input or I/O errors.
#[derive(Debug, Parser)]
#[command(name = "klausmeier", version)]
struct Cli {
    /// TOML run configuration; the canonical scenario when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for assembly, sweeps and convergence studies.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the kernel assumptions and print the kernel report as JSON.
    ValidateKernel,
    /// Assemble the Galerkin matrices and write them as CSV.
    Assemble,
    /// Integrate the coefficient system and write the trajectory.
    Simulate {
        /// Reuse matrices from an `assemble` output directory.
        #[arg(long, value_name = "DIR")]
        operators: Option<PathBuf>,
    },
    /// Simulate and check every estimate along the trajectory.
    Verify {
        /// Reuse matrices from an `assemble` output directory.
        #[arg(long, value_name = "DIR")]
        operators: Option<PathBuf>,
    },
    /// Compare runs at increasing truncation levels.
    Convergence {
        /// Levels, e.g. `4,8,16` (overrides `convergence.m_list`).
        #[arg(long, value_delimiter = ',', value_name = "M,...")]
        m_list: Option<Vec<usize>>,
    },
    /// Run `verify` over the `[sweep]` parameter grid.
    Sweep,
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    let ctx = RunContext { out: cli.out.unwrap_or_else(|| cfg.output.directory.clone()), quiet: cli.quiet };
    match cli.command {
        Command::ValidateKernel => commands::validate_kernel(&cfg, &ctx),
        Command::Assemble => commands::assemble(&cfg, &ctx),
        Command::Simulate { operators } => commands::simulate(&cfg, &ctx, operators.as_deref()),
        Command::Verify { operators } => commands::verify(&cfg, &ctx, operators.as_deref()),
        Command::Convergence { m_list } => {
            commands::convergence(&cfg, &ctx, m_list.as_deref().unwrap_or(&cfg.convergence.m_list))
        }
        Command::Sweep => commands::sweep(&cfg, &ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
