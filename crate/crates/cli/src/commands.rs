//! Subcommand implementations. Each one loads its inputs, runs the library,
//! prints a short human-readable summary on stdout, and optionally persists
//! row-level output as CSV.

use anyhow::{bail, Result};
use std::path::Path;

use tickcoint_core::estimators::{estimate_all, TaperConfig};
use tickcoint_core::limitlab::{
    distribution_experiment, levels_experiment, limit_functional_for, rate_experiment,
    sample_functional_many, DistConfig, EstimatorKind, LevelsConfig, RateConfig,
};
use tickcoint_core::market;

use crate::config;
use crate::csvio;

pub fn init(out: &Path) -> Result<()> {
    csvio::persist_bytes(out, config::EXAMPLE_CONFIG.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn simulate(config_path: &Path, horizon: f64, seed: u64, out: &Path) -> Result<()> {
    let cfg = config::load_market(config_path)?;
    let market = market::simulate(&cfg, horizon, seed, &[])?;
    csvio::persist_bytes(out, &csvio::ticks_to_csv(&market)?)?;
    println!(
        "simulated horizon {} with loadings ({}, {}), seed {}",
        market.horizon, market.theta21, market.theta12, seed
    );
    for (i, a) in market.assets.iter().enumerate() {
        println!(
            "  asset {}: {} trades, last log price {:.6}",
            i + 1,
            a.path.times().len(),
            a.path.values().last().copied().unwrap_or(0.0)
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn estimate(
    input: &Path,
    horizon: Option<f64>,
    dt: f64,
    taper_m: usize,
    delta: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let rows = csvio::read_ticks(input)?;
    let (p1, p2) = csvio::ticks_to_paths(&rows, horizon)?;
    let report = estimate_all(&p1, &p2, dt, delta, &TaperConfig { m: taper_m })?;
    println!("grid points: {} (dt {})", report.n_grid, dt);
    println!("theta, least squares:    {:.6}", report.theta_ols);
    println!("theta, tapered (m {}):    {:.6}", taper_m, report.theta_taper);
    if let (Some(v), Some(d)) = (report.theta_ctaper, delta) {
        println!("theta, window-averaged (delta {d}): {v:.6}");
    }
    println!("spurious coefficient:    {:.6}", report.delta_spurious);
    for (i, g) in report.memory.iter().enumerate() {
        println!(
            "asset {} return memory d: {:.4} (se {:.4}, bandwidth {})",
            i + 1,
            g.d,
            g.se,
            g.bandwidth
        );
    }
    if let Some(out) = out {
        csvio::persist_bytes(out, &csvio::estimate_to_csv(&report)?)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub struct McCommon {
    pub seed: u64,
    pub workers: Option<usize>,
}

pub fn mc_rate(
    config_path: &Path,
    estimator: EstimatorKind,
    n_grid: Vec<u64>,
    reps: u32,
    common: &McCommon,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = RateConfig {
        market: config::load_market(config_path)?,
        estimator,
        n_grid,
        reps,
        master_seed: common.seed,
        workers: common.workers,
    };
    let report = rate_experiment(&cfg)?;
    println!(
        "rate experiment: estimator {}, reps {}, seed {}",
        estimator.label(),
        reps,
        common.seed
    );
    println!("{:>10} {:>14} {:>14}", "n", "rmse", "bias");
    for p in &report.points {
        println!("{:>10} {:>14.6e} {:>14.6e}", p.n, p.rmse, p.bias);
    }
    println!(
        "log-log rmse slope: {:.4} +/- {:.4} (claimed exponent {} implies {})",
        report.slope, report.slope_se, report.exponent, -report.exponent
    );
    if report.failures > 0 {
        println!("dropped {} failed replications", report.failures);
    }
    if let Some(out) = out {
        csvio::persist_bytes(out, &csvio::mc_rows_to_csv(&report.rows)?)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn mc_dist(
    config_path: &Path,
    estimator: EstimatorKind,
    n: u64,
    reps: u32,
    reference_draws: u32,
    grid: usize,
    common: &McCommon,
    out: Option<&Path>,
    reference_out: Option<&Path>,
) -> Result<()> {
    let market = config::load_market(config_path)?;
    let reference = limit_functional_for(&market, &estimator)?;
    let cfg = DistConfig {
        market,
        estimator,
        n,
        reps,
        reference,
        reference_draws,
        grid,
        master_seed: common.seed,
        workers: common.workers,
    };
    let report = distribution_experiment(&cfg)?;
    let (em, es) = mean_sd(&report.scaled_errors);
    let (rm, rs) = mean_sd(&report.reference);
    println!(
        "distribution experiment: estimator {}, n {}, reps {}, seed {}",
        estimator.label(),
        n,
        reps,
        common.seed
    );
    println!(
        "scaled errors (exponent {}): mean {:.4}, sd {:.4}",
        report.exponent, em, es
    );
    println!(
        "reference draws ({} on grid {}): mean {:.4}, sd {:.4}",
        reference_draws, grid, rm, rs
    );
    println!(
        "KS statistic {:.4}, p-value {:.4}",
        report.ks.statistic, report.ks.p_value
    );
    if report.failures > 0 {
        println!("dropped {} failed replications", report.failures);
    }
    if let Some(out) = out {
        csvio::persist_bytes(out, &csvio::mc_rows_to_csv(&report.rows)?)?;
        println!("wrote {}", out.display());
    }
    if let Some(out) = reference_out {
        csvio::persist_bytes(out, &csvio::draws_to_csv(&report.reference)?)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub fn mc_levels(config_path: &Path, horizon: f64, reps: u32, common: &McCommon) -> Result<()> {
    let cfg = LevelsConfig {
        market: config::load_market(config_path)?,
        horizon,
        reps,
        master_seed: common.seed,
        workers: common.workers,
    };
    let report = levels_experiment(&cfg)?;
    println!(
        "levels experiment: horizon {}, reps {}, seed {}",
        report.horizon, report.reps, common.seed
    );
    println!("normalized terminal second moments (measured / limit):");
    for i in 0..2 {
        for j in i..2 {
            let got = report.second_moments[i][j];
            let want = report.target[i][j];
            println!(
                "  [{},{}] {:>10.4} / {:>10.4}  (rel err {:+.3})",
                i + 1,
                j + 1,
                got,
                want,
                (got - want) / want
            );
        }
    }
    Ok(())
}

pub fn reference(
    config_path: &Path,
    estimator: EstimatorKind,
    draws: u32,
    grid: usize,
    common: &McCommon,
    out: Option<&Path>,
) -> Result<()> {
    let market = config::load_market(config_path)?;
    let f = limit_functional_for(&market, &estimator)?;
    let xs = sample_functional_many(&f, grid, draws, common.seed, common.workers)?;
    let (mean, sd) = mean_sd(&xs);
    let mut sorted = xs.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    println!(
        "limit functional for estimator {}: {} draws on grid {}, seed {}",
        estimator.label(),
        draws,
        grid,
        common.seed
    );
    println!("mean {mean:.4}, sd {sd:.4}");
    println!(
        "quantiles: 5% {:.4}, 50% {:.4}, 95% {:.4}",
        quantile(&sorted, 0.05),
        quantile(&sorted, 0.50),
        quantile(&sorted, 0.95)
    );
    if let Some(out) = out {
        csvio::persist_bytes(out, &csvio::draws_to_csv(&xs)?)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub fn build_estimator(
    name: &str,
    taper_m: usize,
    delta: Option<f64>,
) -> Result<EstimatorKind> {
    let kind = match name {
        "ols" => EstimatorKind::Ols,
        "taper" => EstimatorKind::Taper { m: taper_m },
        "ctaper" => EstimatorKind::CTaper {
            m: taper_m,
            delta: delta.unwrap_or(1.0),
        },
        "spurious" => EstimatorKind::Spurious,
        other => bail!("unknown estimator {other}"),
    };
    if delta.is_some() && !matches!(kind, EstimatorKind::CTaper { .. }) {
        bail!("--delta only applies to --estimator ctaper");
    }
    Ok(kind)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}
