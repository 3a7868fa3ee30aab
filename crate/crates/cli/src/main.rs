//! `lcl`: experiments on Landau-level eigenvalue clusters.
//!
//! Every subcommand reads a JSON [`config::RunConfig`], writes its tables
//! into the output directory, and records a `manifest.json` from which the
//! run can be relaunched (`--config manifest.json`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lcl_cli::config::{RunConfig, UsageError};
use lcl_cli::{commands, selfcheck, write_outputs};

#[derive(Debug, Parser)]
#[command(
    name = "lcl",
    version,
    about = "Landau-level eigenvalue clusters under long-range potentials"
)]
struct Cli {
    /// JSON run configuration or a previous run's manifest.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for Monte Carlo steps; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "LCL_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Block summary and spectrum for the first q in `q_list`.
    Spectrum,
    /// Both sides of the trace formula for every q in `q_list`.
    TraceSweep,
    /// Symbol-side checks: Hilbert-Schmidt rate, Laguerre-Bessel gap, I_rho, rescaling identity.
    SymbolCheck,
    /// Limiting measure and integral with a Monte Carlo cross-check.
    Measure,
    /// Run the invariant suite; exits nonzero if any invariant fails.
    Selfcheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::TraceSweep => "trace-sweep",
            Command::SymbolCheck => "symbol-check",
            Command::Measure => "measure",
            Command::Selfcheck => "selfcheck",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(UsageError("`--jobs` must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let dir = cli
        .output
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("lcl-out"));
    let out = match cli.command {
        Command::Spectrum => commands::spectrum(&cfg),
        Command::TraceSweep => commands::trace_sweep(&cfg),
        Command::SymbolCheck => commands::symbol_check(&cfg),
        Command::Measure => commands::measure(&cfg),
        Command::Selfcheck => selfcheck::selfcheck(&cfg),
    }?;
    write_outputs(&dir, cli.command.name(), &cfg, &out)?;
    if cli.command == Command::Selfcheck {
        let failed = out.results["failed"].as_array().map_or(0, |a| a.len());
        eprintln!("selfcheck: {failed} invariant(s) failed; manifest in {}", dir.display());
    }
    Ok(out.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("lcl: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("lcl: {e:#}");
            ExitCode::from(1)
        }
    }
}
