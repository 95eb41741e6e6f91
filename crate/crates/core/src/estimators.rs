//! Cointegrating-parameter and memory estimators for sampled price paths.
//!
//! The spectral estimators work from tapered discrete Fourier transforms of
//! increments at a handful of low frequencies. The cosine taper vanishes at
//! both ends of the sample, which makes the increment-weighted transform
//! identical to a level-weighted sum (summation by parts); both forms are
//! implemented and must agree to near machine precision.

use num_complex::Complex64;
use thiserror::Error;

use crate::market::StepPath;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("series too short: need at least {needed}, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    MismatchedLengths { left: usize, right: usize },
    #[error("degenerate input: {what}")]
    Degenerate { what: &'static str },
    #[error("invalid parameter {name}: {value} (want {constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

/// Number of low frequencies `1..=m` pooled by the tapered estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaperConfig {
    pub m: usize,
}

impl Default for TaperConfig {
    fn default() -> Self {
        TaperConfig { m: 3 }
    }
}

/// Least squares through the origin: `sum(y1 y2) / sum(y2^2)`.
pub fn ols_theta(y1: &[f64], y2: &[f64]) -> Result<f64, EstimatorError> {
    if y1.len() != y2.len() {
        return Err(EstimatorError::MismatchedLengths {
            left: y1.len(),
            right: y2.len(),
        });
    }
    if y1.is_empty() {
        return Err(EstimatorError::TooShort { needed: 1, got: 0 });
    }
    let num: f64 = y1.iter().zip(y2).map(|(a, b)| a * b).sum();
    let den: f64 = y2.iter().map(|b| b * b).sum();
    if den == 0.0 {
        return Err(EstimatorError::Degenerate {
            what: "regressor sum of squares is zero",
        });
    }
    Ok(num / den)
}

/// The spurious-regression coefficient of `y1` on `y2`: numerically the same
/// ratio as `ols_theta`, but its large-sample behavior is a random ratio of
/// Brownian integrals rather than a consistent loading estimate.
pub fn spurious_delta(y1: &[f64], y2: &[f64]) -> Result<f64, EstimatorError> {
    ols_theta(y1, y2)
}

/// Cosine taper `h(t) = (1 - cos 2 pi t) / 2`; vanishes at 0 and 1.
pub fn cosine_taper(t: f64) -> f64 {
    0.5 * (1.0 - (2.0 * std::f64::consts::PI * t).cos())
}

fn h_ell(t: f64, ell: usize) -> Complex64 {
    Complex64::from_polar(cosine_taper(t), 2.0 * std::f64::consts::PI * ell as f64 * t)
}

fn check_dft_args(levels: &[f64], ell: usize) -> Result<usize, EstimatorError> {
    if levels.len() < 3 {
        return Err(EstimatorError::TooShort {
            needed: 3,
            got: levels.len(),
        });
    }
    let n = levels.len() - 1;
    if ell == 0 || ell >= n {
        return Err(EstimatorError::InvalidParameter {
            name: "ell",
            value: ell as f64,
            constraint: "1 <= ell < n",
        });
    }
    Ok(n)
}

/// Tapered discrete Fourier transform of the increments of `levels`
/// (`levels.len() == n + 1`) at frequency `2 pi ell / n`:
/// `sum_{j=1..n} h(j/n) (x_j - x_{j-1}) exp(i j 2 pi ell / n)`.
pub fn tapered_dft(levels: &[f64], ell: usize) -> Result<Complex64, EstimatorError> {
    let n = check_dft_args(levels, ell)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 1..=n {
        let t = j as f64 / n as f64;
        acc += h_ell(t, ell) * (levels[j] - levels[j - 1]);
    }
    Ok(acc)
}

/// The same transform written against levels instead of increments:
/// `-(1/n) sum_{j=0..n-1} w_ell(j, n) x_j` with
/// `w_ell(j, n) = n (h_ell((j+1)/n) - h_ell(j/n))`. Exact because the taper
/// vanishes at both endpoints.
pub fn tapered_dft_sbp(levels: &[f64], ell: usize) -> Result<Complex64, EstimatorError> {
    let n = check_dft_args(levels, ell)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, x) in levels.iter().take(n).enumerate() {
        acc += taper_weight(j, n, ell) * x;
    }
    Ok(-acc / n as f64)
}

/// `w_ell(j, n) = n (h_ell((j+1)/n) - h_ell(j/n))`; sums to zero over
/// `j = 0..n-1`, so level-weighted sums ignore constant shifts.
pub fn taper_weight(j: usize, n: usize, ell: usize) -> Complex64 {
    let nf = n as f64;
    nf * (h_ell((j + 1) as f64 / nf, ell) - h_ell(j as f64 / nf, ell))
}

/// Tapered spectral loading estimate from two level series sampled on the
/// same grid: `Re(sum_ell d1_ell conj(d2_ell)) / sum_ell |d2_ell|^2`.
pub fn taper_theta(
    levels1: &[f64],
    levels2: &[f64],
    cfg: &TaperConfig,
) -> Result<f64, EstimatorError> {
    if levels1.len() != levels2.len() {
        return Err(EstimatorError::MismatchedLengths {
            left: levels1.len(),
            right: levels2.len(),
        });
    }
    if cfg.m == 0 {
        return Err(EstimatorError::InvalidParameter {
            name: "m",
            value: 0.0,
            constraint: ">= 1",
        });
    }
    let n = levels1.len().saturating_sub(1);
    if n < 2 * cfg.m + 2 {
        return Err(EstimatorError::TooShort {
            needed: 2 * cfg.m + 3,
            got: levels1.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ell in 1..=cfg.m {
        let d1 = tapered_dft(levels1, ell)?;
        let d2 = tapered_dft(levels2, ell)?;
        num += (d1 * d2.conj()).re;
        den += d2.norm_sqr();
    }
    if den == 0.0 {
        return Err(EstimatorError::Degenerate {
            what: "tapered spectrum of regressor is zero",
        });
    }
    Ok(num / den)
}

/// Continuous-record variant: levels are window integrals of the paths over
/// consecutive intervals of width `delta` (with a zero level prepended), so
/// the transform weights locally averaged prices instead of point samples.
pub fn ctaper_theta(
    p1: &StepPath,
    p2: &StepPath,
    delta: f64,
    cfg: &TaperConfig,
) -> Result<f64, EstimatorError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(EstimatorError::InvalidParameter {
            name: "delta",
            value: delta,
            constraint: "finite, > 0",
        });
    }
    let horizon = p1.horizon().min(p2.horizon());
    let count = (horizon / delta).floor() as usize;
    if count < 2 * cfg.m + 2 {
        return Err(EstimatorError::TooShort {
            needed: 2 * cfg.m + 2,
            got: count,
        });
    }
    let levels = |p: &StepPath| {
        let mut v = Vec::with_capacity(count + 1);
        v.push(0.0);
        v.extend(p.window_integrals(delta, count));
        v
    };
    taper_theta(&levels(p1), &levels(p2), cfg)
}

/// Log-periodogram memory estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GphEstimate {
    /// Estimated memory parameter `d` (Hurst index minus one half for
    /// fractional Gaussian noise).
    pub d: f64,
    /// Asymptotic standard error `sqrt(pi^2 / 6 / sum (g - mean g)^2)`.
    pub se: f64,
    pub bandwidth: usize,
}

/// Regresses the log periodogram of `x` at frequencies `2 pi ell / n`,
/// `ell = 1..=m`, on `-2 ln |2 sin(omega/2)|` (with intercept). The slope
/// estimates the memory parameter `d`.
pub fn gph_memory(x: &[f64], m: usize) -> Result<GphEstimate, EstimatorError> {
    let n = x.len();
    if m < 2 {
        return Err(EstimatorError::InvalidParameter {
            name: "m",
            value: m as f64,
            constraint: ">= 2",
        });
    }
    if n < 2 * m + 2 {
        return Err(EstimatorError::TooShort {
            needed: 2 * m + 2,
            got: n,
        });
    }
    let mut gs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for ell in 1..=m {
        let omega = 2.0 * std::f64::consts::PI * ell as f64 / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            acc += Complex64::from_polar(*v, omega * j as f64);
        }
        let periodogram = acc.norm_sqr() / (2.0 * std::f64::consts::PI * n as f64);
        if periodogram <= 0.0 {
            return Err(EstimatorError::Degenerate {
                what: "zero periodogram ordinate",
            });
        }
        gs.push(-2.0 * (2.0 * (omega / 2.0).sin()).abs().ln());
        ys.push(periodogram.ln());
    }
    let mf = m as f64;
    let gbar = gs.iter().sum::<f64>() / mf;
    let ybar = ys.iter().sum::<f64>() / mf;
    let mut sgg = 0.0;
    let mut sgy = 0.0;
    for (g, y) in gs.iter().zip(&ys) {
        sgg += (g - gbar) * (g - gbar);
        sgy += (g - gbar) * (y - ybar);
    }
    if sgg == 0.0 {
        return Err(EstimatorError::Degenerate {
            what: "constant regressor in log-periodogram regression",
        });
    }
    Ok(GphEstimate {
        d: sgy / sgg,
        se: (std::f64::consts::PI.powi(2) / 6.0 / sgg).sqrt(),
        bandwidth: m,
    })
}

/// All estimates for one simulated or observed pair, computed on a common
/// calendar grid of `n_grid` steps of width `dt` plus (optionally) window
/// integrals of width `delta`.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub n_grid: usize,
    pub theta_ols: f64,
    pub theta_taper: f64,
    pub theta_ctaper: Option<f64>,
    pub delta_spurious: f64,
    /// Log-periodogram memory estimates of the two assets' grid returns.
    pub memory: [GphEstimate; 2],
}

pub fn estimate_all(
    p1: &StepPath,
    p2: &StepPath,
    dt: f64,
    delta: Option<f64>,
    cfg: &TaperConfig,
) -> Result<EstimateReport, EstimatorError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EstimatorError::InvalidParameter {
            name: "dt",
            value: dt,
            constraint: "finite, > 0",
        });
    }
    let horizon = p1.horizon().min(p2.horizon());
    let n = (horizon / dt).floor() as usize;
    if n < 2 * cfg.m + 2 {
        return Err(EstimatorError::TooShort {
            needed: 2 * cfg.m + 2,
            got: n,
        });
    }
    let levels1 = p1.sampled_levels(dt, n);
    let levels2 = p2.sampled_levels(dt, n);
    let theta_ols = ols_theta(&levels1[1..], &levels2[1..])?;
    let theta_taper = taper_theta(&levels1, &levels2, cfg)?;
    let theta_ctaper = match delta {
        Some(d) => Some(ctaper_theta(p1, p2, d, cfg)?),
        None => None,
    };
    let diff = |levels: &[f64]| -> Vec<f64> {
        levels.windows(2).map(|w| w[1] - w[0]).collect()
    };
    let bw = (n as f64).sqrt().floor() as usize;
    let memory = [
        gph_memory(&diff(&levels1), bw)?,
        gph_memory(&diff(&levels2), bw)?,
    ];
    Ok(EstimateReport {
        n_grid: n,
        theta_ols,
        theta_taper,
        theta_ctaper,
        delta_spurious: spurious_delta(&levels1[1..], &levels2[1..])?,
        memory,
    })
}
