//! Command-line driver for the inverse-medium reconstruction library.
//!
//! Three subcommands cover the experiment lifecycle:
//!
//! * `invmed forward` — synthesize noisy far-field data from a known
//!   contrast and write it (plus the truth) to the output directory.
//! * `invmed reconstruct` — synthesize data, invert it with one algorithm,
//!   and write the full output set (per-iteration media, error history,
//!   optional traces).
//! * `invmed compare` — run all three algorithms against one shared noisy
//!   data set, with per-algorithm subdirectories and a combined `mse.csv`.
//!
//! Parameters come from built-in defaults, optionally overridden by a TOML
//! configuration file (`--config`), optionally overridden again by
//! command-line flags. Runs are deterministic for a fixed configuration.
//!
//! Exit codes: 0 on success, 1 on any error (bad arguments, bad
//! configuration, I/O or solver failure), 2 when a reconstruction blew up
//! (error growth beyond the safeguard); partial output is still written in
//! that case.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use invmed::grid::ShapeTag;
use invmed::harness::{run_compare, run_experiment, run_forward_only, ExperimentConfig};
use invmed::regularize::{Algorithm, RunReport};

#[derive(Parser)]
#[command(
    name = "invmed",
    version,
    about = "Reconstruct a 2D acoustic contrast from far-field scattering data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate noisy far-field data from the true contrast and write it,
    /// without reconstructing.
    Forward(Overrides),
    /// Generate data and reconstruct the contrast with one algorithm.
    Reconstruct(Overrides),
    /// Reconstruct one shared data set with all three algorithms.
    Compare(Overrides),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ShapeArg {
    /// Single disk.
    B1,
    /// Disjoint union of a disk and a square.
    B2,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum AlgoArg {
    /// Full-data Levenberg-Marquardt.
    Flm,
    /// Kalman-filtered Levenberg-Marquardt (one linearization per sweep).
    Kfl,
    /// Iterative extended Kalman filter (relinearize per measurement).
    Ekf,
}

/// Experiment parameters exposed on the command line. Anything not listed
/// here (grid half-width, cell count, direction counts, measurement weight,
/// contrast value, period factor, solver tolerance) is available through the
/// configuration file.
#[derive(Args, Debug, Clone)]
struct Overrides {
    /// TOML configuration file; flags below override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Wavenumber.
    #[arg(long)]
    k: Option<f64>,

    /// True contrast shape.
    #[arg(long, value_enum)]
    shape: Option<ShapeArg>,

    /// Noise standard deviation per real/imaginary component.
    #[arg(long)]
    sigma: Option<f64>,

    /// Discrepancy-principle fraction in (0, 1) for flm/kfl.
    #[arg(long)]
    rho: Option<f64>,

    /// Initial weight of the extended Kalman filter.
    #[arg(long)]
    alpha0: Option<f64>,

    /// Reconstruction algorithm (reconstruct only).
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,

    /// Outer iterations.
    #[arg(long)]
    iters: Option<usize>,

    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (created if absent).
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Generate data on the inversion grid itself instead of a finer one.
    #[arg(long)]
    inverse_crime: bool,

    /// Inversion fine-grid nodes per side (power of two).
    #[arg(long, value_name = "N")]
    fine_grid: Option<usize>,

    /// Write per-measurement trace.csv alongside the usual outputs.
    #[arg(long)]
    verbose_trace: bool,
}

impl Overrides {
    /// Resolves the layered configuration: defaults, then file, then flags.
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_toml_file(path)
                .with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(shape) = self.shape {
            config.shape = match shape {
                ShapeArg::B1 => ShapeTag::B1,
                ShapeArg::B2 => ShapeTag::B2,
            };
        }
        if let Some(sigma) = self.sigma {
            config.sigma = sigma;
        }
        if let Some(rho) = self.rho {
            config.rho = rho;
        }
        if let Some(alpha0) = self.alpha0 {
            config.alpha0 = alpha0;
        }
        if let Some(algo) = self.algo {
            config.algo = match algo {
                AlgoArg::Flm => Algorithm::Flm,
                AlgoArg::Kfl => Algorithm::Kfl,
                AlgoArg::Ekf => Algorithm::Ekf,
            };
        }
        if let Some(iters) = self.iters {
            config.iters = iters;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if self.inverse_crime {
            config.inverse_crime = true;
        }
        if let Some(fine_grid) = self.fine_grid {
            config.fine_grid = fine_grid;
        }
        if self.verbose_trace {
            config.verbose_trace = true;
        }
        config.validate()?;
        Ok(config)
    }
}

fn print_summary(report: &RunReport) {
    let last = report.records.last();
    let residual = last.map_or(f64::NAN, |r| r.residual_norm);
    let mse = last.and_then(|r| r.mse);
    let mut line = format!(
        "{}: {} iterations, final residual {residual:.6e}",
        report.algorithm,
        report.last_iter()
    );
    if let Some(mse) = mse {
        line.push_str(&format!(", final squared error {mse:.6e}"));
    }
    if report.blew_up {
        line.push_str(" [blew up]");
    }
    if report.stagnated {
        line.push_str(" [stagnated]");
    }
    println!("{line}");
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Forward(overrides) => {
            let config = overrides.resolve()?;
            run_forward_only(&config, &overrides.out)?;
            println!("wrote far-field data to {}", overrides.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Reconstruct(overrides) => {
            let config = overrides.resolve()?;
            let report = run_experiment(&config, &overrides.out)?;
            print_summary(&report);
            println!("wrote outputs to {}", overrides.out.display());
            Ok(if report.blew_up { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Compare(overrides) => {
            let config = overrides.resolve()?;
            let reports = run_compare(&config, &overrides.out)?;
            for report in &reports {
                print_summary(report);
            }
            println!("wrote outputs to {}", overrides.out.display());
            let blew_up = reports.iter().any(|r| r.blew_up);
            Ok(if blew_up { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
    }
}

fn main() -> ExitCode {
    // Parse manually so usage errors exit with code 1, keeping 2 reserved
    // for the blow-up outcome. Help and version requests surface here as
    // "errors" and exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
