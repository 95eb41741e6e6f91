//! Transaction-level simulation of a bivariate asset price with dependent
//! microstructure noise, together with the estimators of the cointegrating
//! parameter and a Monte Carlo laboratory for their sampling behavior.
//!
//! Modules, roughly bottom-up:
//!
//! * [`rng`] — deterministic ChaCha stream derivation from a master seed.
//! * [`fracgauss`] — exact synthesis of stationary Gaussian sequences
//!   (fractional Gaussian noise, power-law covariances) and fractional
//!   Brownian motion.
//! * [`durations`] — duration models for trade arrival: LMSD, ACD, iid
//!   exponential.
//! * [`clock`] — event clocks built from durations, counting-process queries,
//!   and deterministic time deformation (intraday seasonality).
//! * [`shocks`] — efficient-price shocks and microstructure noise
//!   constructions, including leverage couplings to the duration driver.
//! * [`market`] — assembly of the two step-function log-price paths, exact
//!   sampling and window averaging, level statistics.
//! * [`estimators`] — OLS, tapered frequency-domain, window-averaged tapered,
//!   spurious-regression slope, and log-periodogram memory estimators.
//! * [`limitlab`] — samplers for the limit laws, rate/distribution/levels
//!   experiments, and a two-sample Kolmogorov–Smirnov test.

pub mod clock;
pub mod durations;
pub mod estimators;
pub mod fracgauss;
pub mod limitlab;
pub mod market;
pub mod rng;
pub mod shocks;
