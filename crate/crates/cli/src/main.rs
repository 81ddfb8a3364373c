//! `omcal` command-line tool.
//!
//! Exit codes: 0 success, 2 configuration error, 3 fit non-convergence,
//! 4 data error.

mod commands;
mod csvio;
mod phases;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "omcal", version, about = "Sideband-resolved cavity optomechanics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Mechanical mode index into the config's `mechanics` list.
    #[arg(long, default_value_t = 0)]
    mode: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep eta_g and the measured g0 over detuning for a list of
    /// interferometer phases; emits CSV plus a sidecar skip log.
    SweepEta {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated phases, radians or multiples of pi ("0.77pi").
        #[arg(long, value_name = "LIST")]
        phase: String,
    },
    /// Exact reflection lineshape next to its Fano-identified counterpart
    /// per phase; emits CSV (reflection normalized to the input flux).
    Reflection {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "LIST")]
        phase: String,
    },
    /// Nonlinear least-squares fits; emits a JSON report.
    Fit {
        #[arg(value_enum)]
        model: FitModel,
        /// Input CSV. Lineshape fits: delta_hz,reflection[,sigma].
        /// Backaction: delta_hz,omega_eff_hz,gamma_eff_hz.
        input: PathBuf,
        /// Configuration (required for backaction fixed parameters and
        /// starting values; optional otherwise).
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Fit window half-width in initial linewidths ("none" disables).
        #[arg(long, value_name = "W")]
        window: Option<String>,
        /// Cap on Levenberg-Marquardt iterations.
        #[arg(long, value_name = "N")]
        max_iterations: Option<usize>,
        /// Treat the pump scale as g0^2 P when the power is unknown.
        #[arg(long, value_enum, default_value_t = ScaleMode::Fixed)]
        scale_mode: ScaleMode,
        #[arg(long, default_value_t = 0)]
        mode: usize,
    },
    /// Calibration-tone g0 estimate from a measured or synthesized trace;
    /// emits a JSON report.
    EstimateG0 {
        #[command(flatten)]
        common: CommonArgs,
        /// Read the PSD trace from a CSV file.
        #[arg(long, value_name = "PATH", conflicts_with = "synthesize")]
        trace: Option<PathBuf>,
        /// Synthesize the PSD from the configuration instead.
        #[arg(long)]
        synthesize: bool,
        /// Detuning for a single synthesized estimate (Hz).
        #[arg(long, value_name = "HZ")]
        delta_hz: Option<f64>,
        /// Estimate across the config's sweep grid.
        #[arg(long)]
        sweep: bool,
        /// Analyzer-noise seed; noiseless synthesis when omitted.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Also write the synthesized trace (single-detuning runs).
        #[arg(long, value_name = "PATH")]
        dump_trace: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FitModel {
    Fano,
    Lorentz,
    Backaction,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ScaleMode {
    Fixed,
    Coupled,
}

/// Failure category carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    NonConvergence(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Data(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::NonConvergence(m) | CliError::Data(m) => m,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SweepEta { common, phase } => commands::sweep_eta(&common, &phase),
        Command::Reflection { common, phase } => commands::reflection(&common, &phase),
        Command::Fit { model, input, config, out, window, max_iterations, scale_mode, mode } => {
            commands::fit(model, &input, config.as_deref(), out.as_deref(), window.as_deref(), max_iterations, scale_mode, mode)
        }
        Command::EstimateG0 { common, trace, synthesize, delta_hz, sweep, seed, dump_trace } => {
            commands::estimate_g0(
                &common,
                trace.as_deref(),
                synthesize,
                delta_hz,
                sweep,
                seed,
                dump_trace.as_deref(),
            )
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
