//! Command-line runner: density curves, support reports, separability
//! sweeps, single-draw estimates, NMSE sweeps, estimator CDFs and RCI
//! tables, configured by a key-value file plus overriding flags.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 resource cap exceeded.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eigenpower::harness::{
    run_density, run_estimate, run_estimator_cdf, run_nmse, run_rci, run_separability,
    run_support, ExperimentConfig,
};
use eigenpower::Error;

#[derive(Parser)]
#[command(name = "eigenpower", version, about = "Blind multi-source power estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limit-spectrum density curve and support intervals.
    Density(CommonArgs),
    /// Support boundaries and separability verdicts per power.
    Support(CommonArgs),
    /// Critical-ratio sweep (set `sweep` and `sweep_values`).
    Separability(CommonArgs),
    /// Run every configured estimator on one seeded draw.
    Estimate(CommonArgs),
    /// Monte Carlo NMSE sweep over the SNR grid.
    Nmse(CommonArgs),
    /// Sorted per-trial estimates (empirical distribution functions).
    Cdf(CommonArgs),
    /// Rate of correct joint inference of the multiplicities.
    Rci(CommonArgs),
}

/// Flags shared by every subcommand; each override maps onto the config key
/// of the same name.
#[derive(Args)]
struct CommonArgs {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario selector: a, b or custom.
    #[arg(long)]
    scenario: Option<String>,
    /// Total transmit antennas for scenario (a).
    #[arg(long)]
    n_total: Option<String>,
    /// Comma-separated powers (custom scenario).
    #[arg(long)]
    powers: Option<String>,
    /// Comma-separated multiplicities (custom scenario).
    #[arg(long)]
    mults: Option<String>,
    /// Sensor count N (custom scenario).
    #[arg(long = "N")]
    sensors: Option<String>,
    /// Sample count M (custom scenario).
    #[arg(long = "M")]
    samples: Option<String>,
    /// Fixed noise variance (overrides any SNR grid).
    #[arg(long)]
    sigma2: Option<String>,
    /// Comma-separated SNR grid in dB.
    #[arg(long)]
    snr_db: Option<String>,
    /// Monte Carlo trial count.
    #[arg(long)]
    trials: Option<String>,
    /// Base seed.
    #[arg(long)]
    seed: Option<String>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<String>,
    /// Comma-separated estimator set: stieltjes, classical, moment.
    #[arg(long)]
    estimators: Option<String>,
    /// Symbol constellation: qpsk or gaussian.
    #[arg(long)]
    constellation: Option<String>,
    /// Density grid point count.
    #[arg(long)]
    grid_points: Option<String>,
    /// Density grid lower end.
    #[arg(long)]
    grid_min: Option<String>,
    /// Density grid upper end.
    #[arg(long)]
    grid_max: Option<String>,
    /// Imaginary offset of the inverse transform.
    #[arg(long)]
    y_offset: Option<String>,
    /// Maximum hypothesized source count.
    #[arg(long)]
    k_max: Option<String>,
    /// Eigenvalue-gap threshold for hypothesis pruning.
    #[arg(long)]
    tau: Option<String>,
    /// Restrict hypotheses to even cluster sizes.
    #[arg(long)]
    even_sizes: Option<String>,
    /// Write the per-trial estimate dump next to the NMSE summary.
    #[arg(long)]
    dump_trials: Option<String>,
    /// Overlay one seeded draw's eigenvalues on the density output.
    #[arg(long)]
    overlay: Option<String>,
    /// Separability sweep kind: c0-vs-ratio or c-vs-sigma2.
    #[arg(long)]
    sweep: Option<String>,
    /// Comma-separated sweep parameter values.
    #[arg(long)]
    sweep_values: Option<String>,
    /// Sensor ratio held fixed in the c-vs-sigma2 sweep.
    #[arg(long)]
    c0: Option<String>,
    /// Upper cap of the critical-ratio searches.
    #[arg(long)]
    cap: Option<String>,
}

impl CommonArgs {
    fn build_config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::parse_str(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        let overrides: [(&str, &Option<String>); 26] = [
            ("scenario", &self.scenario),
            ("n_total", &self.n_total),
            ("powers", &self.powers),
            ("mults", &self.mults),
            ("sensors", &self.sensors),
            ("samples", &self.samples),
            ("sigma2", &self.sigma2),
            ("snr_db", &self.snr_db),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("out", &self.out),
            ("estimators", &self.estimators),
            ("constellation", &self.constellation),
            ("grid_points", &self.grid_points),
            ("grid_min", &self.grid_min),
            ("grid_max", &self.grid_max),
            ("y_offset", &self.y_offset),
            ("k_max", &self.k_max),
            ("tau", &self.tau),
            ("even_sizes", &self.even_sizes),
            ("dump_trials", &self.dump_trials),
            ("overlay", &self.overlay),
            ("sweep", &self.sweep),
            ("sweep_values", &self.sweep_values),
            ("c0", &self.c0),
            ("cap", &self.cap),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

/// Write `csv` to the configured output path, or to stdout when none is set.
fn emit(cfg: &ExperimentConfig, csv: &str) -> Result<(), Error> {
    match &cfg.out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            f.write_all(csv.as_bytes())?;
            Ok(())
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

/// Sibling path for auxiliary outputs (`<out>.<suffix>.csv`).
fn side_path(out: &str, suffix: &str) -> String {
    format!("{out}.{suffix}.csv")
}

fn run(command: &Command) -> Result<(), Error> {
    match command {
        Command::Density(args) => {
            let cfg = args.build_config()?;
            let run = run_density(&cfg)?;
            emit(&cfg, &run.csv)?;
            if let (Some(out), Some(eigs)) = (&cfg.out, &run.empirical) {
                let mut body = String::from("eigenvalue\n");
                for v in eigs {
                    body.push_str(&format!("{v:.16e}\n"));
                }
                std::fs::write(side_path(out, "empirical"), body)?;
            }
            if cfg.out.is_some() {
                for (lo, hi) in &run.curve.support_intervals {
                    println!("support {lo:.6} {hi:.6}");
                }
                if run.curve.zero_mass > 0.0 {
                    println!("zero_mass {}", run.curve.zero_mass);
                }
            }
            Ok(())
        }
        Command::Support(args) => {
            let cfg = args.build_config()?;
            let run = run_support(&cfg)?;
            emit(&cfg, &run.csv)
        }
        Command::Separability(args) => {
            let cfg = args.build_config()?;
            let run = run_separability(&cfg)?;
            emit(&cfg, &run.csv)
        }
        Command::Estimate(args) => {
            let cfg = args.build_config()?;
            let run = run_estimate(&cfg)?;
            emit(&cfg, &run.csv)
        }
        Command::Nmse(args) => {
            let cfg = args.build_config()?;
            let run = run_nmse(&cfg)?;
            emit(&cfg, &run.csv)?;
            if let (Some(out), Some(dump)) = (&cfg.out, &run.trial_dump) {
                std::fs::write(side_path(out, "trials"), dump)?;
            }
            Ok(())
        }
        Command::Cdf(args) => {
            let cfg = args.build_config()?;
            let run = run_estimator_cdf(&cfg)?;
            emit(&cfg, &run.csv)
        }
        Command::Rci(args) => {
            let cfg = args.build_config()?;
            let run = run_rci(&cfg)?;
            emit(&cfg, &run.csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_)
                | Error::Contract(_)
                | Error::Domain(_)
                | Error::Unsupported(_) => 2,
                Error::Numerical { .. } | Error::Io(_) => 3,
                Error::Resource(_) => 4,
            };
            ExitCode::from(code)
        }
    }
}
