use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ollg::cli_io::checks::{check_invariants, format_checks};
use ollg::cli_io::load_config;
use ollg::cli_io::session::{
    compare_directories, format_compare, format_spectrum, restart_directory, run_directory,
    spectrum_directory, RunSummary,
};
use ollg::diagnostics::EnergyRecord;
use ollg::dynamics::TrajectoryStatus;

// Field-sized temporaries are allocated every step; the system allocator
// keeps returning them to the kernel.
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Exit code of a run that stopped on the blow-up signal.
const EXIT_BLOWUP: u8 = 2;

#[derive(Parser)]
#[command(name = "ollg", version, about = "Landau-Lifshitz flow of a director field under the Oseen-Frank energy")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configuration into a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to output.directory of the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override initial.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override solver.t_end.
        #[arg(long)]
        until: Option<f64>,
    },
    /// Run the invariant suite at a small grid size and print a CSV report.
    CheckInvariants {
        #[arg(long, default_value_t = 32)]
        n_side: usize,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weak-metric distance between two runs at their common snapshot times.
    Compare {
        first: PathBuf,
        second: PathBuf,
        /// Metric smoothness in (0, 1).
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-block gradient energy at every snapshot of a run.
    Spectrum {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue a run from a snapshot (the latest by default).
    Restart {
        dir: PathBuf,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// New end time.
        #[arg(long)]
        until: Option<f64>,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("OLLG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .with_context(|| format!("OLLG_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        bail!("OLLG_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn progress(quiet: bool) -> impl FnMut(&EnergyRecord) {
    move |r: &EnergyRecord| {
        if !quiet {
            if r.blowup {
                eprintln!("t = {:.6e}  blow-up flagged", r.t);
            } else {
                eprintln!(
                    "t = {:.6e}  E = {:.10e}  dissipated = {:.6e}  |grad n|_inf = {:.4e}",
                    r.t, r.energy.total, r.dissipation_cum, r.grad_sup
                );
            }
        }
    }
}

fn finish(summary: RunSummary, dir: &Path, quiet: bool) -> ExitCode {
    match summary.status {
        TrajectoryStatus::Completed => {
            if !quiet {
                eprintln!("completed {} steps into {}", summary.steps, dir.display());
            }
            ExitCode::SUCCESS
        }
        TrajectoryStatus::BlowUp { step } => {
            eprintln!("blow-up flagged at step {step}; outputs in {}", dir.display());
            ExitCode::from(EXIT_BLOWUP)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    let quiet = cli.quiet;
    match cli.command {
        Command::Run { config, out, seed, until } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(t) = until {
                cfg = cfg.with_t_end(t)?;
            }
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let summary = run_directory(&cfg, &dir, &mut progress(quiet))?;
            Ok(finish(summary, &dir, quiet))
        }
        Command::Restart { dir, snapshot, until } => {
            let summary = restart_directory(&dir, snapshot.as_deref(), until, &mut progress(quiet))?;
            Ok(finish(summary, &dir, quiet))
        }
        Command::CheckInvariants { n_side, out } => {
            let checks = check_invariants(n_side)?;
            emit(&format_checks(&checks), out.as_deref())?;
            let failed = checks.iter().filter(|c| !c.passed()).count();
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", checks.len());
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { first, second, s, out } => {
            let report = compare_directories(&first, &second, s)?;
            emit(&format_compare(&report), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum { dir, out } => {
            emit(&format_spectrum(&spectrum_directory(&dir)?), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
