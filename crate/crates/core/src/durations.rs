//! Duration models for transaction arrivals.
//!
//! All models produce positive inter-trade durations with unit-mean
//! exponential innovations. The LMSD model couples durations to a stationary
//! Gaussian volatility driver and is the route to long-memory trading
//! intensity; the returned driver is one element longer than the durations so
//! noise constructions can anticipate the next duration's state.

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::fracgauss::{gen_long_memory_gaussian, FracGaussError, GaussianSpec};

#[derive(Debug, Error)]
pub enum DurationError {
    #[error("invalid parameter {name}: {value} (want {constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error(transparent)]
    Driver(#[from] FracGaussError),
}

/// Long Memory Stochastic Duration model: `tau_k = eps_k * exp(sigma * Y_k)`
/// with iid standard-exponential `eps` and a stationary Gaussian driver `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmsdSpec {
    pub sigma: f64,
    pub driver: GaussianSpec,
}

impl LmsdSpec {
    pub fn validate(&self) -> Result<(), DurationError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(DurationError::InvalidParameter {
                name: "sigma",
                value: self.sigma,
                constraint: "finite, > 0",
            });
        }
        self.driver.validate()?;
        Ok(())
    }

    /// Mean duration `E[tau] = exp(sigma^2 / 2)`.
    pub fn mean_duration(&self) -> f64 {
        (self.sigma * self.sigma / 2.0).exp()
    }

    /// Arrival intensity of the induced counting process,
    /// `lambda = exp(-sigma^2 / 2)`.
    pub fn intensity(&self) -> f64 {
        (-self.sigma * self.sigma / 2.0).exp()
    }
}

/// An LMSD draw: `tau.len() == n`, `driver.len() == n + 1`. `tau[k]` is built
/// from `driver[k]`; the extra trailing driver value is the state one step
/// ahead of the last duration, for noise constructions that anticipate it.
#[derive(Debug, Clone)]
pub struct LmsdSample {
    pub tau: Vec<f64>,
    pub driver: Vec<f64>,
}

/// Draws `n` LMSD durations plus the driver path.
///
/// The driver is consumed from `rng` first (one batch), then the `n`
/// exponentials, so the stream layout is stable.
pub fn gen_lmsd<R: Rng + ?Sized>(
    spec: &LmsdSpec,
    n: usize,
    rng: &mut R,
) -> Result<LmsdSample, DurationError> {
    spec.validate()?;
    if n == 0 {
        return Err(DurationError::InvalidParameter {
            name: "n",
            value: 0.0,
            constraint: "n >= 1",
        });
    }
    let driver = gen_long_memory_gaussian(&spec.driver, n + 1, rng)?;
    let mut tau = Vec::with_capacity(n);
    for y in driver.iter().take(n) {
        let eps: f64 = rng.sample(Exp1);
        tau.push(eps * (spec.sigma * y).exp());
    }
    Ok(LmsdSample { tau, driver })
}

/// Autoregressive Conditional Duration model:
/// `psi_k = omega + alpha * tau_{k-1} + beta * psi_{k-1}`, `tau_k = psi_k * eps_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcdSpec {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Steps discarded before recording; the recursion starts at the
    /// stationary mean.
    pub burn_in: usize,
}

impl AcdSpec {
    pub fn new(omega: f64, alpha: f64, beta: f64) -> Self {
        AcdSpec {
            omega,
            alpha,
            beta,
            burn_in: 10_000,
        }
    }

    pub fn validate(&self) -> Result<(), DurationError> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(DurationError::InvalidParameter {
                name: "omega",
                value: self.omega,
                constraint: "finite, > 0",
            });
        }
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(DurationError::InvalidParameter {
                name: "alpha/beta",
                value: self.alpha.min(self.beta),
                constraint: ">= 0",
            });
        }
        if !(self.alpha + self.beta < 1.0) {
            return Err(DurationError::InvalidParameter {
                name: "alpha+beta",
                value: self.alpha + self.beta,
                constraint: "< 1 (stationarity)",
            });
        }
        Ok(())
    }

    /// Stationary mean duration `omega / (1 - alpha - beta)`.
    pub fn mean_duration(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }

    /// Arrival intensity, the reciprocal of the mean duration.
    pub fn intensity(&self) -> f64 {
        1.0 / self.mean_duration()
    }
}

/// Draws `n` ACD durations after the burn-in. Consumes `burn_in + n`
/// exponentials from `rng`. `psi_k >= omega` always holds.
pub fn gen_acd<R: Rng + ?Sized>(
    spec: &AcdSpec,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>, DurationError> {
    spec.validate()?;
    if n == 0 {
        return Err(DurationError::InvalidParameter {
            name: "n",
            value: 0.0,
            constraint: "n >= 1",
        });
    }
    let mut psi = spec.mean_duration();
    let mut tau_prev = psi; // start at the stationary mean
    let mut out = Vec::with_capacity(n);
    for step in 0..spec.burn_in + n {
        psi = spec.omega + spec.alpha * tau_prev + spec.beta * psi;
        let eps: f64 = rng.sample(Exp1);
        let tau = psi * eps;
        if step >= spec.burn_in {
            out.push(tau);
        }
        tau_prev = tau;
    }
    Ok(out)
}

/// `n` iid exponential durations with the given arrival rate (a Poisson
/// process clock).
pub fn gen_iid_durations<R: Rng + ?Sized>(
    rate: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>, DurationError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(DurationError::InvalidParameter {
            name: "rate",
            value: rate,
            constraint: "finite, > 0",
        });
    }
    Ok((0..n)
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            e / rate
        })
        .collect())
}
