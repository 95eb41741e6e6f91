//! The bivariate transaction-level market simulator.
//!
//! Each asset trades at its own event clock. At its `k`-th trade an asset's
//! log price moves by its own efficient shock plus a noise increment, and
//! reloads the other asset's accumulated efficient shocks (scaled by the
//! cross-loading) as of its own trade time. With loadings `theta21 * theta12
//! == 1` the pair is cointegrated: `y1 - theta21 * y2` stays tight. Other
//! loadings leave two prices that share shocks but drift apart.
//!
//! Simulation is deterministic in `(config, horizon, master seed, tags)`:
//! every random ingredient draws from its own derived stream, so changing one
//! component's demand never disturbs another's draw.

use rayon::prelude::*;
use thiserror::Error;

use crate::clock::{clock_from_durations, deform_clock, ClockError, DeformationSpec, EventClock};
use crate::durations::{gen_acd, gen_iid_durations, gen_lmsd, AcdSpec, DurationError, LmsdSpec};
use crate::rng::derive_rng;
use crate::shocks::{
    gen_efficient, gen_noise, EfficientSpec, NoiseSample, NoiseSpec, ShockError, XiConstruction,
};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("invalid parameter {name}: {value} (want {constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("asset {asset}: {construction} noise needs an LMSD clock for its driver")]
    IncompatibleNoise {
        asset: usize,
        construction: &'static str,
    },
    #[error("could not cover horizon {horizon} after {attempts} sizing attempts")]
    HorizonNotCovered { horizon: f64, attempts: u32 },
    #[error(transparent)]
    Duration(#[from] DurationError),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error(transparent)]
    Shock(#[from] ShockError),
}

/// Event-clock model for one asset.
#[derive(Debug, Clone, PartialEq)]
pub enum ClockSpec {
    Poisson { lambda: f64 },
    Lmsd(LmsdSpec),
    Acd(AcdSpec),
}

impl ClockSpec {
    pub fn validate(&self) -> Result<(), MarketError> {
        match self {
            ClockSpec::Poisson { lambda } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(MarketError::InvalidParameter {
                        name: "lambda",
                        value: *lambda,
                        constraint: "finite, > 0",
                    });
                }
                Ok(())
            }
            ClockSpec::Lmsd(spec) => spec.validate().map_err(MarketError::from),
            ClockSpec::Acd(spec) => spec.validate().map_err(MarketError::from),
        }
    }

    /// Long-run arrival intensity in the clock's own (operational) time.
    pub fn intensity(&self) -> f64 {
        match self {
            ClockSpec::Poisson { lambda } => *lambda,
            ClockSpec::Lmsd(spec) => spec.intensity(),
            ClockSpec::Acd(spec) => spec.intensity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetConfig {
    pub clock: ClockSpec,
    pub efficient: EfficientSpec,
    pub noise: NoiseSpec,
    pub deformation: Option<DeformationSpec>,
}

impl AssetConfig {
    pub fn poisson(lambda: f64, sigma: f64, noise: NoiseSpec) -> Self {
        AssetConfig {
            clock: ClockSpec::Poisson { lambda },
            efficient: EfficientSpec { sigma },
            noise,
            deformation: None,
        }
    }

    /// Calendar-time arrival intensity (operational intensity times the
    /// deformation's mean slope).
    pub fn intensity(&self) -> f64 {
        let slope = self
            .deformation
            .as_ref()
            .map(|d| d.mean_slope())
            .unwrap_or(1.0);
        self.clock.intensity() * slope
    }

    fn validate(&self, asset: usize) -> Result<(), MarketError> {
        self.clock.validate()?;
        self.efficient.validate()?;
        self.noise.validate()?;
        if let Some(d) = &self.deformation {
            d.validate()?;
        }
        if let NoiseSpec::Strong { construction, .. } = &self.noise {
            if construction.needs_driver() && !matches!(self.clock, ClockSpec::Lmsd(_)) {
                let name = match construction {
                    XiConstruction::LeverageSquare => "leverage-square",
                    XiConstruction::LeverageHermite23 => "leverage-hermite23",
                    XiConstruction::MartingaleProduct { .. } => "martingale-product",
                    XiConstruction::IndependentLongMemory { .. } => unreachable!(),
                };
                return Err(MarketError::IncompatibleNoise {
                    asset,
                    construction: name,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    /// Loading of asset 2's efficient shocks in asset 1's price.
    pub theta21: f64,
    /// Loading of asset 1's efficient shocks in asset 2's price.
    pub theta12: f64,
    pub assets: [AssetConfig; 2],
}

impl MarketConfig {
    /// Cointegrated pair: `theta21 = theta`, `theta12 = 1 / theta`.
    pub fn cointegrated(theta: f64, a1: AssetConfig, a2: AssetConfig) -> Self {
        MarketConfig {
            theta21: theta,
            theta12: 1.0 / theta,
            assets: [a1, a2],
        }
    }

    /// Free loadings; `theta21 * theta12 != 1` leaves the pair spurious.
    pub fn with_loadings(theta21: f64, theta12: f64, a1: AssetConfig, a2: AssetConfig) -> Self {
        MarketConfig {
            theta21,
            theta12,
            assets: [a1, a2],
        }
    }

    pub fn is_cointegrated(&self) -> bool {
        (self.theta21 * self.theta12 - 1.0).abs() < 1e-12
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if !self.theta21.is_finite() || !self.theta12.is_finite() {
            return Err(MarketError::InvalidParameter {
                name: "theta21/theta12",
                value: self.theta21,
                constraint: "finite",
            });
        }
        for (i, asset) in self.assets.iter().enumerate() {
            asset.validate(i + 1)?;
        }
        Ok(())
    }
}

/// A piecewise-constant path: value `values[j]` on `[times[j], times[j+1])`,
/// zero before the first event.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPath {
    times: Vec<f64>,
    values: Vec<f64>,
    horizon: f64,
}

impl StepPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, horizon: f64) -> Result<Self, MarketError> {
        if times.len() != values.len() {
            return Err(MarketError::InvalidParameter {
                name: "times/values",
                value: times.len() as f64,
                constraint: "equal lengths",
            });
        }
        let mut prev = 0.0f64;
        for t in &times {
            if !(*t >= prev) || !t.is_finite() {
                return Err(MarketError::InvalidParameter {
                    name: "times",
                    value: *t,
                    constraint: "nonnegative, nondecreasing",
                });
            }
            prev = *t;
        }
        Ok(StepPath {
            times,
            values,
            horizon,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Path value at `t` (right-continuous, jumps at event times).
    pub fn sample_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|x| *x <= t);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Values on the grid `dt, 2 dt, ..., n dt`.
    pub fn sample_grid(&self, dt: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|j| self.sample_at(j as f64 * dt)).collect()
    }

    /// Levels `y(0), y(dt), ..., y(n dt)`: the grid with the origin
    /// prepended, as the spectral estimators expect.
    pub fn sampled_levels(&self, dt: f64, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.sample_at(0.0));
        out.extend(self.sample_grid(dt, n));
        out
    }

    /// Exact integral of the step function over `[a, b]`.
    pub fn integral_over(&self, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let mut idx = self.times.partition_point(|x| *x <= a);
        let mut lo = a;
        let mut total = 0.0;
        while lo < b {
            let next = self.times.get(idx).copied().unwrap_or(f64::INFINITY);
            let hi = next.min(b);
            let val = if idx == 0 { 0.0 } else { self.values[idx - 1] };
            total += val * (hi - lo);
            lo = hi;
            while idx < self.times.len() && self.times[idx] <= lo {
                idx += 1;
            }
        }
        total
    }

    pub fn average_over(&self, a: f64, b: f64) -> f64 {
        self.integral_over(a, b) / (b - a)
    }

    /// Window integrals `I(k) = integral over [(k-1) delta, k delta]` for
    /// `k = 1..=count`.
    pub fn window_integrals(&self, delta: f64, count: usize) -> Vec<f64> {
        (1..=count)
            .map(|k| self.integral_over((k - 1) as f64 * delta, k as f64 * delta))
            .collect()
    }
}

/// Everything simulated for one asset. The clock may extend past the horizon
/// (coverage is guaranteed); the path carries only events up to the horizon.
#[derive(Debug, Clone)]
pub struct AssetRecord {
    pub clock: EventClock,
    pub path: StepPath,
    pub efficient: Vec<f64>,
    pub noise: NoiseSample,
    /// LMSD volatility driver, when the clock has one (length = trade count
    /// plus one).
    pub driver: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Market {
    pub assets: [AssetRecord; 2],
    pub horizon: f64,
    pub theta21: f64,
    pub theta12: f64,
}

const TAG_DURATIONS: u64 = 1;
const TAG_EFFICIENT: u64 = 2;
const TAG_NOISE: u64 = 3;
const MAX_SIZING_ATTEMPTS: u32 = 32;

struct RawAsset {
    observed: EventClock,
    efficient: Vec<f64>,
    noise: NoiseSample,
    driver: Option<Vec<f64>>,
}

fn simulate_asset(
    cfg: &AssetConfig,
    asset: usize,
    horizon: f64,
    master_seed: u64,
    tags: &[u64],
) -> Result<RawAsset, MarketError> {
    let target_op = cfg
        .deformation
        .as_ref()
        .map(|d| d.apply(horizon))
        .unwrap_or(horizon);

    let mean_count = cfg.clock.intensity() * target_op;
    let mut n = (1.2 * mean_count + 8.0 * mean_count.sqrt() + 64.0).ceil() as usize;

    let mut tag_buf = tags.to_vec();
    tag_buf.extend_from_slice(&[asset as u64, 0, 0]);
    let base = tag_buf.len() - 2;

    for attempt in 0..MAX_SIZING_ATTEMPTS {
        tag_buf[base] = TAG_DURATIONS;
        tag_buf[base + 1] = attempt as u64;
        let mut rng = derive_rng(master_seed, &tag_buf);
        let (durations, driver) = match &cfg.clock {
            ClockSpec::Poisson { lambda } => (gen_iid_durations(*lambda, n, &mut rng)?, None),
            ClockSpec::Lmsd(spec) => {
                let s = gen_lmsd(spec, n, &mut rng)?;
                (s.tau, Some(s.driver))
            }
            ClockSpec::Acd(spec) => (gen_acd(spec, n, &mut rng)?, None),
        };
        let total: f64 = durations.iter().sum();
        if total <= target_op {
            n *= 2;
            continue;
        }

        let operational = clock_from_durations(&durations)?;
        let observed = match &cfg.deformation {
            Some(d) => deform_clock(&operational, d)?,
            None => operational.clone(),
        };

        tag_buf[base] = TAG_EFFICIENT;
        tag_buf[base + 1] = 0;
        let mut rng = derive_rng(master_seed, &tag_buf);
        let efficient = gen_efficient(&cfg.efficient, n, &mut rng)?;

        tag_buf[base] = TAG_NOISE;
        tag_buf[base + 1] = 0;
        let mut rng = derive_rng(master_seed, &tag_buf);
        let noise = gen_noise(&cfg.noise, n, driver.as_deref(), &mut rng)?;

        return Ok(RawAsset {
            observed,
            efficient,
            noise,
            driver,
        });
    }
    Err(MarketError::HorizonNotCovered {
        horizon,
        attempts: MAX_SIZING_ATTEMPTS,
    })
}

/// Simulates both assets over `[0, horizon]`. `tags` namespaces the random
/// streams so distinct replications (or experiments) sharing a master seed
/// stay independent.
pub fn simulate(
    cfg: &MarketConfig,
    horizon: f64,
    master_seed: u64,
    tags: &[u64],
) -> Result<Market, MarketError> {
    cfg.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(MarketError::InvalidParameter {
            name: "horizon",
            value: horizon,
            constraint: "finite, > 0",
        });
    }

    let raw1 = simulate_asset(&cfg.assets[0], 0, horizon, master_seed, tags)?;
    let raw2 = simulate_asset(&cfg.assets[1], 1, horizon, master_seed, tags)?;

    let prefix = |e: &[f64]| {
        let mut p = Vec::with_capacity(e.len() + 1);
        let mut acc = 0.0;
        p.push(0.0);
        for x in e {
            acc += x;
            p.push(acc);
        }
        p
    };
    let pe1 = prefix(&raw1.efficient);
    let pe2 = prefix(&raw2.efficient);

    let build_path = |own: &RawAsset, other: &RawAsset, pe_own: &[f64], pe_other: &[f64], loading: f64| {
        let count = own.observed.count(horizon);
        let mut times = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        for j in 0..count {
            let t = own.observed.event_time(j + 1);
            let read = other.observed.count(t);
            times.push(t);
            values.push(pe_own[j + 1] + own.noise.xi[j + 1] + loading * pe_other[read]);
        }
        StepPath::new(times, values, horizon)
    };

    let path1 = build_path(&raw1, &raw2, &pe1, &pe2, cfg.theta21)?;
    let path2 = build_path(&raw2, &raw1, &pe2, &pe1, cfg.theta12)?;

    let pack = |raw: RawAsset, path: StepPath| AssetRecord {
        clock: raw.observed,
        path,
        efficient: raw.efficient,
        noise: raw.noise,
        driver: raw.driver,
    };

    Ok(Market {
        assets: [pack(raw1, path1), pack(raw2, path2)],
        horizon,
        theta21: cfg.theta21,
        theta12: cfg.theta12,
    })
}

/// Covariance matrix of `(y1(T), y2(T)) / sqrt(T)` in the large-`T` limit,
/// from the arrival intensities and shock variances.
pub fn limit_levels_cov(cfg: &MarketConfig) -> [[f64; 2]; 2] {
    let r1 = cfg.assets[0].intensity() * cfg.assets[0].efficient.sigma.powi(2);
    let r2 = cfg.assets[1].intensity() * cfg.assets[1].efficient.sigma.powi(2);
    let s11 = r1 + cfg.theta21 * cfg.theta21 * r2;
    let s22 = cfg.theta12 * cfg.theta12 * r1 + r2;
    let s12 = cfg.theta12 * r1 + cfg.theta21 * r2;
    [[s11, s12], [s12, s22]]
}

#[derive(Debug, Clone)]
pub struct LevelsReport {
    /// Monte Carlo second moments of `(y1(T), y2(T)) / sqrt(T)`.
    pub second_moments: [[f64; 2]; 2],
    /// Limit covariance from the model parameters.
    pub target: [[f64; 2]; 2],
    pub horizon: f64,
    pub reps: u32,
}

/// Estimates the second moments of the normalized terminal levels over
/// `reps` independent replications.
pub fn levels_fclt_statistics(
    cfg: &MarketConfig,
    horizon: f64,
    reps: u32,
    master_seed: u64,
) -> Result<LevelsReport, MarketError> {
    cfg.validate()?;
    let sums = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let market = simulate(cfg, horizon, master_seed, &[0x4c56, rep as u64])?;
            let u = market.assets[0].path.sample_at(horizon) / horizon.sqrt();
            let v = market.assets[1].path.sample_at(horizon) / horizon.sqrt();
            Ok::<[f64; 3], MarketError>([u * u, u * v, v * v])
        })
        .try_reduce(
            || [0.0; 3],
            |a, b| Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2]]),
        )?;
    let m = reps as f64;
    Ok(LevelsReport {
        second_moments: [[sums[0] / m, sums[1] / m], [sums[1] / m, sums[2] / m]],
        target: limit_levels_cov(cfg),
        horizon,
        reps,
    })
}
