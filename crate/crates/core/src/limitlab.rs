//! Monte Carlo laboratory: reference samplers for the limit laws of the
//! estimators, the scale constants entering them, a two-sample
//! Kolmogorov-Smirnov test, and the rate / distribution / levels experiments
//! driven by the command-line tool.
//!
//! Every experiment is deterministic in its configuration and master seed,
//! and independent of the worker count: each replication draws from its own
//! derived stream.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::{
    cosine_taper, ols_theta, spurious_delta, taper_theta, ctaper_theta, EstimatorError,
    TaperConfig,
};
use crate::fracgauss::{gen_fbm, FbmGrid, FracGaussError, GaussianSpec};
use crate::market::{
    levels_fclt_statistics, limit_levels_cov, simulate, AssetConfig, LevelsReport, Market,
    MarketConfig, MarketError,
};
use crate::rng::derive_rng;
use crate::shocks::{NoiseSpec, XiConstruction};

/// Grid resolution used by the functional samplers unless overridden.
pub const DEFAULT_GRID: usize = 1 << 12;

const TAG_RATE: u64 = 0x7261;
const TAG_DIST: u64 = 0x6469;
const TAG_REF: u64 = 0x7265;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter {name}: {value} (want {constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("{failed} of {total} replications failed; first failure: {first}")]
    TooManyFailures {
        failed: u32,
        total: u32,
        first: String,
    },
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Gaussian(#[from] FracGaussError),
}

/// A distributional limit of a scaled estimation error, sampled by
/// discretizing Brownian motion (and, where needed, an independent
/// fractional Brownian motion with the given Hurst index) on a fine grid
/// over the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitFunctional {
    /// `scale * int(B B_H) / int(B^2)`: the least-squares limit under
    /// antipersistent (weak) noise.
    RatioBbh { hurst: f64, scale: f64 },
    /// `scale * int(B dB_H) / int(B^2)`: the least-squares limit under
    /// stationary-level (strong) noise.
    RatioBdbh { hurst: f64, scale: f64 },
    /// Tapered-transform analogue of `RatioBbh` pooling frequencies
    /// `1..=m`.
    TaperWeak { hurst: f64, scale: f64, m: usize },
    /// Tapered-transform analogue of `RatioBdbh`; the fractional ingredient
    /// enters through the taper's derivative.
    TaperStrong { hurst: f64, scale: f64, m: usize },
    /// `int(B2 B1) / int(B2^2)` for a correlated Brownian pair with the
    /// given covariance: the spurious-regression coefficient's limit.
    /// `own_denominator = false` switches to `int(B1^2)`, a displayed
    /// variant kept for comparison.
    SpuriousRatio {
        cov: [[f64; 2]; 2],
        own_denominator: bool,
    },
}

impl LimitFunctional {
    pub fn validate(&self) -> Result<(), LabError> {
        let check_hurst = |h: f64| {
            if h > 0.0 && h < 1.0 {
                Ok(())
            } else {
                Err(LabError::InvalidParameter {
                    name: "hurst",
                    value: h,
                    constraint: "in (0, 1)",
                })
            }
        };
        let check_scale = |s: f64| {
            if s > 0.0 && s.is_finite() {
                Ok(())
            } else {
                Err(LabError::InvalidParameter {
                    name: "scale",
                    value: s,
                    constraint: "finite, > 0",
                })
            }
        };
        match self {
            LimitFunctional::RatioBbh { hurst, scale }
            | LimitFunctional::RatioBdbh { hurst, scale } => {
                check_hurst(*hurst)?;
                check_scale(*scale)
            }
            LimitFunctional::TaperWeak { hurst, scale, m }
            | LimitFunctional::TaperStrong { hurst, scale, m } => {
                check_hurst(*hurst)?;
                check_scale(*scale)?;
                if *m == 0 {
                    return Err(LabError::InvalidParameter {
                        name: "m",
                        value: 0.0,
                        constraint: ">= 1",
                    });
                }
                Ok(())
            }
            LimitFunctional::SpuriousRatio { cov, .. } => {
                let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
                if cov[0][0] <= 0.0 || cov[1][1] <= 0.0 || det <= 0.0 {
                    return Err(LabError::InvalidParameter {
                        name: "cov",
                        value: det,
                        constraint: "symmetric positive definite",
                    });
                }
                if (cov[0][1] - cov[1][0]).abs() > 1e-12 * cov[0][0].abs().max(cov[1][1].abs()) {
                    return Err(LabError::InvalidParameter {
                        name: "cov",
                        value: cov[0][1] - cov[1][0],
                        constraint: "symmetric",
                    });
                }
                Ok(())
            }
        }
    }
}

fn bm_increments<R: Rng + ?Sized>(grid: usize, rng: &mut R) -> Vec<f64> {
    let sd = (1.0 / grid as f64).sqrt();
    (0..grid)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn cumsum0(increments: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for d in increments {
        acc += d;
        out.push(acc);
    }
    out
}

fn trapezoid_product(a: &[f64], b: &[f64], dt: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.len() - 1 {
        acc += 0.5 * (a[j] * b[j] + a[j + 1] * b[j + 1]);
    }
    acc * dt
}

fn taper_c(t: f64, ell: usize) -> Complex64 {
    Complex64::from_polar(cosine_taper(t), 2.0 * std::f64::consts::PI * ell as f64 * t)
}

/// Derivative of `t -> h(t) exp(2 pi i ell t)`.
fn taper_c_deriv(t: f64, ell: usize) -> Complex64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let inner = Complex64::new(
        std::f64::consts::PI * (two_pi * t).sin(),
        two_pi * ell as f64 * cosine_taper(t),
    );
    inner * Complex64::from_polar(1.0, two_pi * ell as f64 * t)
}

fn functional_value<R: Rng + ?Sized>(
    f: &LimitFunctional,
    grid: usize,
    rng: &mut R,
) -> Result<f64, LabError> {
    let dt = 1.0 / grid as f64;
    match f {
        LimitFunctional::RatioBbh { hurst, scale } => {
            let db = bm_increments(grid, rng);
            let b = cumsum0(&db);
            let bh = gen_fbm(
                *hurst,
                &FbmGrid::Equispaced {
                    n: grid,
                    t_max: 1.0,
                },
                rng,
            )?;
            let den = trapezoid_product(&b, &b, dt);
            Ok(scale * trapezoid_product(&b, &bh, dt) / den)
        }
        LimitFunctional::RatioBdbh { hurst, scale } => {
            let db = bm_increments(grid, rng);
            let b = cumsum0(&db);
            let bh = gen_fbm(
                *hurst,
                &FbmGrid::Equispaced {
                    n: grid,
                    t_max: 1.0,
                },
                rng,
            )?;
            // int B dB_H by parts: B(1) B_H(1) - sum B_H(t_j) dB_j.
            let mut stoch = 0.0;
            for j in 0..grid {
                stoch += bh[j] * db[j];
            }
            let num = b[grid] * bh[grid] - stoch;
            let den = trapezoid_product(&b, &b, dt);
            Ok(scale * num / den)
        }
        LimitFunctional::TaperWeak { hurst, scale, m } => {
            let db = bm_increments(grid, rng);
            let bh = gen_fbm(
                *hurst,
                &FbmGrid::Equispaced {
                    n: grid,
                    t_max: 1.0,
                },
                rng,
            )?;
            let mut num = 0.0;
            let mut den = 0.0;
            for ell in 1..=*m {
                let mut u = Complex64::new(0.0, 0.0);
                let mut v = Complex64::new(0.0, 0.0);
                for j in 0..grid {
                    let t = (j + 1) as f64 * dt;
                    let w = taper_c(t, ell);
                    u += w * db[j];
                    v += w * (bh[j + 1] - bh[j]);
                }
                num += (v * u.conj()).re;
                den += u.norm_sqr();
            }
            Ok(scale * num / den)
        }
        LimitFunctional::TaperStrong { hurst, scale, m } => {
            let db = bm_increments(grid, rng);
            let bh = gen_fbm(
                *hurst,
                &FbmGrid::Equispaced {
                    n: grid,
                    t_max: 1.0,
                },
                rng,
            )?;
            let mut num = 0.0;
            let mut den = 0.0;
            for ell in 1..=*m {
                let mut u = Complex64::new(0.0, 0.0);
                let mut w = Complex64::new(0.0, 0.0);
                for j in 0..grid {
                    let t = (j + 1) as f64 * dt;
                    u += taper_c(t, ell) * db[j];
                    w += taper_c_deriv(t, ell) * (bh[j + 1] - bh[j]);
                }
                num += (-w * u.conj()).re;
                den += u.norm_sqr();
            }
            Ok(scale * num / den)
        }
        LimitFunctional::SpuriousRatio {
            cov,
            own_denominator,
        } => {
            let l11 = cov[0][0].sqrt();
            let l21 = cov[0][1] / l11;
            let l22 = (cov[1][1] - l21 * l21).sqrt();
            let w1 = cumsum0(&bm_increments(grid, rng));
            let w2 = cumsum0(&bm_increments(grid, rng));
            let b1: Vec<f64> = w1.iter().map(|x| l11 * x).collect();
            let b2: Vec<f64> = w1
                .iter()
                .zip(&w2)
                .map(|(x, y)| l21 * x + l22 * y)
                .collect();
            let num = trapezoid_product(&b2, &b1, dt);
            let den = if *own_denominator {
                trapezoid_product(&b2, &b2, dt)
            } else {
                trapezoid_product(&b1, &b1, dt)
            };
            Ok(num / den)
        }
    }
}

/// One draw from the limit law. The Brownian ingredient is drawn first, then
/// the fractional one, so a fixed stream yields a fixed coupled pair.
pub fn sample_functional<R: Rng + ?Sized>(
    f: &LimitFunctional,
    grid: usize,
    rng: &mut R,
) -> Result<f64, LabError> {
    f.validate()?;
    if grid < 16 {
        return Err(LabError::InvalidParameter {
            name: "grid",
            value: grid as f64,
            constraint: ">= 16",
        });
    }
    functional_value(f, grid, rng)
}

/// Independent draws, one derived stream per draw (worker-count invariant).
pub fn sample_functional_many(
    f: &LimitFunctional,
    grid: usize,
    draws: u32,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<Vec<f64>, LabError> {
    f.validate()?;
    if grid < 16 {
        return Err(LabError::InvalidParameter {
            name: "grid",
            value: grid as f64,
            constraint: ">= 16",
        });
    }
    with_pool(workers, || {
        (0..draws)
            .into_par_iter()
            .map(|draw| {
                let mut rng = derive_rng(master_seed, &[TAG_REF, draw as u64]);
                functional_value(f, grid, &mut rng)
            })
            .collect()
    })?
}

/// Model constants entering the limit scales: loading `theta`, per-asset
/// calendar arrival intensities, efficient-shock standard deviations, noise
/// scale constants, and the noise memory index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    pub theta: f64,
    pub lambda: [f64; 2],
    pub sigma: [f64; 2],
    pub c: [f64; 2],
    pub hurst: f64,
}

/// Variance rate of the cointegration error's martingale part:
/// `lambda1 sigma1^2 / theta^2 + lambda2 sigma2^2`.
pub fn denominator_variance(p: &ScaleParams) -> f64 {
    p.lambda[0] * p.sigma[0] * p.sigma[0] / (p.theta * p.theta)
        + p.lambda[1] * p.sigma[1] * p.sigma[1]
}

/// Scale of the weak-noise limits:
/// `sqrt((c1^2 lambda1^{2H} + theta^2 c2^2 lambda2^{2H}) / denominator)`.
/// The `lambda^{2H}` factors convert noise accumulated per trade into
/// calendar time.
pub fn weak_ols_scale(p: &ScaleParams) -> f64 {
    let h2 = 2.0 * p.hurst;
    let num = p.c[0] * p.c[0] * p.lambda[0].powf(h2)
        + p.theta * p.theta * p.c[1] * p.c[1] * p.lambda[1].powf(h2);
    (num / denominator_variance(p)).sqrt()
}

/// Scale of the strong-noise limits:
/// `sqrt((c1^2 + theta^2 c2^2) / denominator)`. No intensity factors: the
/// stationary level series contributes through its value at the last trade,
/// not through accumulation.
pub fn strong_scale(p: &ScaleParams) -> f64 {
    let num = p.c[0] * p.c[0] + p.theta * p.theta * p.c[1] * p.c[1];
    (num / denominator_variance(p)).sqrt()
}

/// Scale of the window-averaged strong-noise limit with window width
/// `delta`: the strong scale times `delta^{H - 3/2}`, making the error
/// depend on the calendar span `n delta` alone. `displayed = true` switches
/// to a `delta^H` factor, a variant kept for comparison with the
/// `delta`-dependent normalization it implies.
pub fn ctaper_scale(p: &ScaleParams, delta: f64, displayed: bool) -> f64 {
    let expo = if displayed { p.hurst } else { p.hurst - 1.5 };
    strong_scale(p) * delta.powf(expo)
}

/// Two-sample Kolmogorov-Smirnov comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
}

/// Survival function of the Kolmogorov distribution,
/// `2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100u32 {
        let term = (-2.0 * (j * j) as f64 * x * x).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Largest ECDF gap between two samples, with the usual asymptotic p-value
/// (finite-sample corrected effective size). Ties are handled by advancing
/// both samples past the tied value before comparing.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, LabError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(LabError::InvalidParameter {
            name: "sample size",
            value: a.len().min(b.len()) as f64,
            constraint: ">= 2 in each sample",
        });
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(LabError::InvalidParameter {
            name: "samples",
            value: f64::NAN,
            constraint: "no NaN values",
        });
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(gap);
    }
    let neff = (n as f64 * m as f64) / (n + m) as f64;
    let lambda = (neff.sqrt() + 0.12 + 0.11 / neff.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
        n,
        m,
    })
}

/// Which estimator an experiment applies to the simulated pair. Paths are
/// sampled on the unit calendar grid, so a horizon of `n` yields `n` grid
/// points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    Ols,
    Taper { m: usize },
    CTaper { m: usize, delta: f64 },
    Spurious,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Ols => "ols",
            EstimatorKind::Taper { .. } => "taper",
            EstimatorKind::CTaper { .. } => "ctaper",
            EstimatorKind::Spurious => "spurious",
        }
    }
}

/// Applies the estimator to a simulated market on the unit grid.
pub fn apply_estimator(market: &Market, kind: &EstimatorKind) -> Result<f64, LabError> {
    let n = market.horizon.floor() as usize;
    let p1 = &market.assets[0].path;
    let p2 = &market.assets[1].path;
    let value = match kind {
        EstimatorKind::Ols => {
            ols_theta(&p1.sample_grid(1.0, n), &p2.sample_grid(1.0, n))?
        }
        EstimatorKind::Spurious => {
            spurious_delta(&p1.sample_grid(1.0, n), &p2.sample_grid(1.0, n))?
        }
        EstimatorKind::Taper { m } => {
            taper_theta(
                &p1.sampled_levels(1.0, n),
                &p2.sampled_levels(1.0, n),
                &TaperConfig { m: *m },
            )?
        }
        EstimatorKind::CTaper { m, delta } => {
            ctaper_theta(p1, p2, *delta, &TaperConfig { m: *m })?
        }
    };
    Ok(value)
}

fn asset_noise_exponent(asset: &AssetConfig) -> f64 {
    match &asset.noise {
        NoiseSpec::None => 1.0,
        NoiseSpec::Weak { h, .. } => 0.5 - h,
        NoiseSpec::Strong { construction, .. } => match construction {
            XiConstruction::IndependentLongMemory { driver } => 1.5 - driver.hurst(),
            XiConstruction::LeverageSquare => match &asset.clock {
                crate::market::ClockSpec::Lmsd(spec) => 1.5 - spec.driver.hurst(),
                _ => 1.0,
            },
            // The Hermite-2/3 combination damps the duration-memory channel,
            // leaving the standard rate; the sign-product level series is
            // memoryless outright.
            XiConstruction::LeverageHermite23 => 1.0,
            XiConstruction::MartingaleProduct { .. } => 1.0,
        },
    }
}

/// Exponent `p` such that `n^p (estimate - loading)` is asymptotically
/// nondegenerate. The slower asset dominates; the spurious coefficient gets
/// exponent zero (it converges in law, not in probability).
pub fn rate_exponent(cfg: &MarketConfig, estimator: &EstimatorKind) -> f64 {
    if matches!(estimator, EstimatorKind::Spurious) {
        return 0.0;
    }
    cfg.assets
        .iter()
        .map(asset_noise_exponent)
        .fold(f64::INFINITY, f64::min)
}

fn strong_constant(asset: &AssetConfig, c: f64) -> Result<(f64, f64), LabError> {
    let long_memory_factor = |spec: &GaussianSpec| -> Result<f64, LabError> {
        match spec {
            GaussianSpec::LongMemory { h, c } => Ok((c / (h * (2.0 * h - 1.0))).sqrt()),
            GaussianSpec::Summable { .. } => Err(LabError::Unsupported(
                "short-memory level driver has no wired limit constant".into(),
            )),
        }
    };
    match &asset.noise {
        NoiseSpec::Strong { construction, .. } => match construction {
            XiConstruction::IndependentLongMemory { driver } => {
                let h = driver.hurst();
                let phi = long_memory_factor(driver)?;
                Ok((h, c * phi * asset.intensity().powf(h - 1.0)))
            }
            XiConstruction::LeverageSquare => match &asset.clock {
                crate::market::ClockSpec::Lmsd(spec) => {
                    let h = spec.driver.hurst();
                    let phi = long_memory_factor(&spec.driver)?;
                    let s = spec.sigma;
                    let coupled = 2.0 * s * (s * s / 2.0).exp();
                    Ok((h, c * coupled * phi * asset.intensity().powf(h - 1.0)))
                }
                _ => Err(LabError::Unsupported(
                    "leverage noise without an LMSD clock".into(),
                )),
            },
            XiConstruction::LeverageHermite23 | XiConstruction::MartingaleProduct { .. } => {
                Err(LabError::Unsupported(
                    "no closed-form limit constant wired for this construction; \
                     pass an explicit reference functional"
                        .into(),
                ))
            }
        },
        _ => Err(LabError::Unsupported("asset is not in the strong regime".into())),
    }
}

/// Builds the matching limit functional for a market/estimator pair, where a
/// closed-form scale is available: weak noise with the least-squares or
/// tapered estimator, strong long-memory noise (independent or square
/// construction), and the spurious coefficient.
pub fn limit_functional_for(
    cfg: &MarketConfig,
    estimator: &EstimatorKind,
) -> Result<LimitFunctional, LabError> {
    cfg.validate()?;
    if matches!(estimator, EstimatorKind::Spurious) {
        return Ok(LimitFunctional::SpuriousRatio {
            cov: limit_levels_cov(cfg),
            own_denominator: true,
        });
    }
    let lambda = [cfg.assets[0].intensity(), cfg.assets[1].intensity()];
    let sigma = [
        cfg.assets[0].efficient.sigma,
        cfg.assets[1].efficient.sigma,
    ];
    match (&cfg.assets[0].noise, &cfg.assets[1].noise) {
        (NoiseSpec::Weak { h: h1, c: c1 }, NoiseSpec::Weak { h: h2, c: c2 }) => {
            if (h1 - h2).abs() > 1e-12 {
                return Err(LabError::Unsupported(
                    "assets with different weak-noise memory".into(),
                ));
            }
            let p = ScaleParams {
                theta: cfg.theta21,
                lambda,
                sigma,
                c: [*c1, *c2],
                hurst: *h1,
            };
            match estimator {
                EstimatorKind::Ols => Ok(LimitFunctional::RatioBbh {
                    hurst: *h1,
                    scale: weak_ols_scale(&p),
                }),
                EstimatorKind::Taper { m } => Ok(LimitFunctional::TaperWeak {
                    hurst: *h1,
                    scale: weak_ols_scale(&p),
                    m: *m,
                }),
                EstimatorKind::CTaper { .. } => Err(LabError::Unsupported(
                    "window-averaged estimator has no weak-noise reference wired".into(),
                )),
                EstimatorKind::Spurious => unreachable!(),
            }
        }
        (NoiseSpec::Strong { c: c1, .. }, NoiseSpec::Strong { c: c2, .. }) => {
            let (hu1, e1) = strong_constant(&cfg.assets[0], *c1)?;
            let (hu2, e2) = strong_constant(&cfg.assets[1], *c2)?;
            if (hu1 - hu2).abs() > 1e-12 {
                return Err(LabError::Unsupported(
                    "assets with different strong-noise memory".into(),
                ));
            }
            let p = ScaleParams {
                theta: cfg.theta21,
                lambda,
                sigma,
                c: [e1, e2],
                hurst: hu1,
            };
            match estimator {
                EstimatorKind::Ols => Ok(LimitFunctional::RatioBdbh {
                    hurst: hu1,
                    scale: strong_scale(&p),
                }),
                EstimatorKind::Taper { m } => Ok(LimitFunctional::TaperStrong {
                    hurst: hu1,
                    scale: strong_scale(&p),
                    m: *m,
                }),
                EstimatorKind::CTaper { m, delta } => Ok(LimitFunctional::TaperStrong {
                    hurst: hu1,
                    scale: ctaper_scale(&p, *delta, false),
                    m: *m,
                }),
                EstimatorKind::Spurious => unreachable!(),
            }
        }
        _ => Err(LabError::Unsupported(
            "assets must share a noise regime with known limit constants".into(),
        )),
    }
}

fn with_pool<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, LabError> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            if w == 0 {
                return Err(LabError::InvalidParameter {
                    name: "workers",
                    value: 0.0,
                    constraint: ">= 1",
                });
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| LabError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// One Monte Carlo replication's outcome. For convergent estimators the
/// scaled error is `n^p (estimate - loading)`; for the spurious coefficient,
/// whose limit is a law rather than a constant, it is the raw estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub experiment: &'static str,
    pub n: u64,
    pub rep: u32,
    pub seed: u64,
    pub estimate: f64,
    pub scaled_error: f64,
}

fn error_center(estimator: &EstimatorKind, truth: f64) -> f64 {
    if matches!(estimator, EstimatorKind::Spurious) {
        0.0
    } else {
        truth
    }
}

#[derive(Debug, Clone)]
pub struct RateConfig {
    pub market: MarketConfig,
    pub estimator: EstimatorKind,
    pub n_grid: Vec<u64>,
    pub reps: u32,
    pub master_seed: u64,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub n: u64,
    pub rmse: f64,
    pub bias: f64,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    /// Log-log slope of RMSE against sample size.
    pub slope: f64,
    pub slope_se: f64,
    /// Claimed rate exponent `p`; the expected slope is `-p`.
    pub exponent: f64,
    pub truth: f64,
    pub rows: Vec<McRow>,
    /// Replications dropped for estimator failures (at most 1% of the run).
    pub failures: u32,
}

/// Partitions replication outcomes, tolerating failures up to one percent
/// of the run; beyond that the experiment aborts with the first failure.
fn collect_replications(
    outcomes: Vec<Result<McRow, LabError>>,
) -> Result<(Vec<McRow>, u32), LabError> {
    let total = outcomes.len() as u32;
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut failed = 0u32;
    let mut first = None;
    for outcome in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                failed += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failed > 0 && f64::from(failed) > 0.01 * f64::from(total) {
        return Err(LabError::TooManyFailures {
            failed,
            total,
            first: first.unwrap(),
        });
    }
    Ok((rows, failed))
}

/// Least-squares slope of `ln y` on `ln x` with intercept; the second value
/// is the slope's standard error (NaN with fewer than 3 points).
fn loglog_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / k;
    let ybar = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let se = if xs.len() > 2 {
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let fit = ybar + slope * (x - xbar);
                (y - fit) * (y - fit)
            })
            .sum();
        (ss_res / (k - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, se)
}

/// Estimates the error's polynomial decay rate across a grid of horizons.
pub fn rate_experiment(cfg: &RateConfig) -> Result<RateReport, LabError> {
    cfg.market.validate()?;
    if cfg.n_grid.len() < 2 {
        return Err(LabError::InvalidParameter {
            name: "n_grid",
            value: cfg.n_grid.len() as f64,
            constraint: ">= 2 horizons",
        });
    }
    if let Some(w) = cfg.n_grid.windows(2).find(|w| w[0] >= w[1]) {
        return Err(LabError::InvalidParameter {
            name: "n_grid",
            value: w[1] as f64,
            constraint: "strictly increasing horizons",
        });
    }
    if cfg.reps < 2 {
        return Err(LabError::InvalidParameter {
            name: "reps",
            value: cfg.reps as f64,
            constraint: ">= 2",
        });
    }
    let exponent = rate_exponent(&cfg.market, &cfg.estimator);
    let truth = cfg.market.theta21;
    let center = error_center(&cfg.estimator, truth);
    let jobs: Vec<(u64, u32)> = cfg
        .n_grid
        .iter()
        .flat_map(|n| (0..cfg.reps).map(move |rep| (*n, rep)))
        .collect();
    let outcomes: Vec<Result<McRow, LabError>> = with_pool(cfg.workers, || {
        jobs.par_iter()
            .map(|(n, rep)| -> Result<McRow, LabError> {
                let market = simulate(
                    &cfg.market,
                    *n as f64,
                    cfg.master_seed,
                    &[TAG_RATE, *n, *rep as u64],
                )?;
                let estimate = apply_estimator(&market, &cfg.estimator)?;
                Ok(McRow {
                    experiment: "rate",
                    n: *n,
                    rep: *rep,
                    seed: cfg.master_seed,
                    estimate,
                    scaled_error: (*n as f64).powf(exponent) * (estimate - center),
                })
            })
            .collect()
    })?;
    let (rows, failures) = collect_replications(outcomes)?;

    let mut points = Vec::with_capacity(cfg.n_grid.len());
    for n in &cfg.n_grid {
        let errs: Vec<f64> = rows
            .iter()
            .filter(|r| r.n == *n)
            .map(|r| r.estimate - truth)
            .collect();
        if errs.len() < 2 {
            return Err(LabError::TooManyFailures {
                failed: failures,
                total: (cfg.n_grid.len() as u32) * cfg.reps,
                first: format!("fewer than 2 surviving replications at n = {n}"),
            });
        }
        let k = errs.len() as f64;
        let bias = errs.iter().sum::<f64>() / k;
        let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / k).sqrt();
        points.push(RatePoint { n: *n, rmse, bias });
    }

    let fit_pts: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, p.rmse)).collect();
    let (slope, slope_se) = loglog_fit(&fit_pts);

    Ok(RateReport {
        points,
        slope,
        slope_se,
        exponent,
        truth,
        rows,
        failures,
    })
}

#[derive(Debug, Clone)]
pub struct DistConfig {
    pub market: MarketConfig,
    pub estimator: EstimatorKind,
    pub n: u64,
    pub reps: u32,
    pub reference: LimitFunctional,
    pub reference_draws: u32,
    pub grid: usize,
    pub master_seed: u64,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DistReport {
    pub rows: Vec<McRow>,
    pub scaled_errors: Vec<f64>,
    pub reference: Vec<f64>,
    pub ks: KsResult,
    pub exponent: f64,
    pub truth: f64,
    /// Replications dropped for estimator failures (at most 1% of the run).
    pub failures: u32,
}

/// Compares the scaled estimation error's Monte Carlo distribution with the
/// limit functional's.
pub fn distribution_experiment(cfg: &DistConfig) -> Result<DistReport, LabError> {
    cfg.market.validate()?;
    cfg.reference.validate()?;
    if cfg.reps < 2 || cfg.reference_draws < 2 {
        return Err(LabError::InvalidParameter {
            name: "reps/reference_draws",
            value: cfg.reps.min(cfg.reference_draws) as f64,
            constraint: ">= 2",
        });
    }
    let exponent = rate_exponent(&cfg.market, &cfg.estimator);
    let truth = cfg.market.theta21;
    let center = error_center(&cfg.estimator, truth);
    let (outcomes, reference) = with_pool(cfg.workers, || -> Result<_, LabError> {
        let outcomes: Vec<Result<McRow, LabError>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| -> Result<McRow, LabError> {
                let market = simulate(
                    &cfg.market,
                    cfg.n as f64,
                    cfg.master_seed,
                    &[TAG_DIST, cfg.n, rep as u64],
                )?;
                let estimate = apply_estimator(&market, &cfg.estimator)?;
                Ok(McRow {
                    experiment: "dist",
                    n: cfg.n,
                    rep,
                    seed: cfg.master_seed,
                    estimate,
                    scaled_error: (cfg.n as f64).powf(exponent) * (estimate - center),
                })
            })
            .collect();
        let reference: Vec<f64> = (0..cfg.reference_draws)
            .into_par_iter()
            .map(|draw| {
                let mut rng = derive_rng(cfg.master_seed, &[TAG_REF, draw as u64]);
                functional_value(&cfg.reference, cfg.grid, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((outcomes, reference))
    })??;
    let (rows, failures) = collect_replications(outcomes)?;
    let scaled_errors: Vec<f64> = rows.iter().map(|r| r.scaled_error).collect();
    let ks = ks_two_sample(&scaled_errors, &reference)?;
    Ok(DistReport {
        rows,
        scaled_errors,
        reference,
        ks,
        exponent,
        truth,
        failures,
    })
}

#[derive(Debug, Clone)]
pub struct LevelsConfig {
    pub market: MarketConfig,
    pub horizon: f64,
    pub reps: u32,
    pub master_seed: u64,
    pub workers: Option<usize>,
}

/// Second moments of normalized terminal levels against their limit
/// covariance.
pub fn levels_experiment(cfg: &LevelsConfig) -> Result<LevelsReport, LabError> {
    with_pool(cfg.workers, || {
        levels_fclt_statistics(&cfg.market, cfg.horizon, cfg.reps, cfg.master_seed)
    })?
    .map_err(LabError::from)
}
