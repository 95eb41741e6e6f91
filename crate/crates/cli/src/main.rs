//! Command-line front end: simulate tick data, estimate loadings from tick
//! files, and run the Monte Carlo rate, distribution, and levels
//! experiments. Exit codes: 0 on success, 1 on usage errors, 2 on runtime
//! failures.

mod commands;
mod config;
mod csvio;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::McCommon;

#[derive(Parser)]
#[command(
    name = "tickcoint",
    version,
    about = "Transaction-level bivariate price simulation and cointegration estimators",
    propagate_version = true
)]
struct Cli {
    /// Master seed: equal seeds and arguments reproduce byte-identical
    /// outputs, independent of the worker count.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for the Monte Carlo commands (default: all cores).
    #[arg(long, global = true, env = "TICKCOINT_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorChoice {
    /// Least-squares ratio on the sampling grid.
    Ols,
    /// Tapered low-frequency transform ratio.
    Taper,
    /// Tapered ratio on window-averaged prices.
    Ctaper,
    /// Spurious-regression coefficient.
    Spurious,
}

impl EstimatorChoice {
    fn name(self) -> &'static str {
        match self {
            EstimatorChoice::Ols => "ols",
            EstimatorChoice::Taper => "taper",
            EstimatorChoice::Ctaper => "ctaper",
            EstimatorChoice::Spurious => "spurious",
        }
    }
}

#[derive(Args)]
struct EstimatorArgs {
    /// Estimator applied to each replication.
    #[arg(long, value_enum, default_value_t = EstimatorChoice::Ols)]
    estimator: EstimatorChoice,
    /// Pooled taper frequencies (taper and ctaper).
    #[arg(long, default_value_t = 3)]
    taper_m: usize,
    /// Averaging-window width (ctaper only; defaults to 1).
    #[arg(long)]
    delta: Option<f64>,
}

impl EstimatorArgs {
    fn build(&self) -> anyhow::Result<tickcoint_core::limitlab::EstimatorKind> {
        commands::build_estimator(self.estimator.name(), self.taper_m, self.delta)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a commented starter market configuration.
    Init {
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one market path and write its ticks as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Calendar span to simulate.
        #[arg(long)]
        horizon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate loadings and return memory from a tick CSV.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Calendar span (default: last trade time in the file).
        #[arg(long)]
        horizon: Option<f64>,
        /// Sampling-grid step.
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        /// Pooled taper frequencies.
        #[arg(long, default_value_t = 3)]
        taper_m: usize,
        /// Also compute the window-averaged estimator with this width.
        #[arg(long)]
        delta: Option<f64>,
        /// Write the report as a one-row CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the estimation error's decay rate across horizons.
    McRate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Comma-separated horizons, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        n_grid: Vec<u64>,
        /// Replications per horizon.
        #[arg(long, default_value_t = 200)]
        reps: u32,
        /// Write per-replication rows as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the scaled error's distribution with its limit law.
    McDist {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Horizon of each replication.
        #[arg(long)]
        n: u64,
        /// Replications.
        #[arg(long, default_value_t = 500)]
        reps: u32,
        /// Draws from the limit functional.
        #[arg(long, default_value_t = 10_000)]
        reference_draws: u32,
        /// Discretization grid of the limit functional.
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        /// Write per-replication rows as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write reference draws as CSV.
        #[arg(long)]
        reference_out: Option<PathBuf>,
    },
    /// Check normalized terminal levels against their limit covariance.
    McLevels {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 1000)]
        reps: u32,
    },
    /// Sample the limit functional matching a configuration and estimator.
    Reference {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[arg(long, default_value_t = 10_000)]
        draws: u32,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        /// Write draws as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = McCommon {
        seed: cli.seed,
        workers: cli.workers,
    };
    match cli.command {
        Cmd::Init { out } => commands::init(&out),
        Cmd::Simulate {
            config,
            horizon,
            out,
        } => commands::simulate(&config, horizon, cli.seed, &out),
        Cmd::Estimate {
            input,
            horizon,
            dt,
            taper_m,
            delta,
            out,
        } => commands::estimate(&input, horizon, dt, taper_m, delta, out.as_deref()),
        Cmd::McRate {
            config,
            estimator,
            n_grid,
            reps,
            out,
        } => commands::mc_rate(
            &config,
            estimator.build()?,
            n_grid,
            reps,
            &common,
            out.as_deref(),
        ),
        Cmd::McDist {
            config,
            estimator,
            n,
            reps,
            reference_draws,
            grid,
            out,
            reference_out,
        } => commands::mc_dist(
            &config,
            estimator.build()?,
            n,
            reps,
            reference_draws,
            grid,
            &common,
            out.as_deref(),
            reference_out.as_deref(),
        ),
        Cmd::McLevels {
            config,
            horizon,
            reps,
        } => commands::mc_levels(&config, horizon, reps, &common),
        Cmd::Reference {
            config,
            estimator,
            draws,
            grid,
            out,
        } => commands::reference(
            &config,
            estimator.build()?,
            draws,
            grid,
            &common,
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    // Die quietly when the reader closes the pipe (e.g. piping into head),
    // instead of panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
