//! Exact synthesis of stationary Gaussian sequences and fractional Brownian
//! motion.
//!
//! The workhorse is circulant embedding: the covariance sequence is embedded
//! in a circulant matrix whose eigenvalues come out of one FFT, and a complex
//! Gaussian spectrum with those variances is transformed back. The sample is
//! exact (no truncation of the covariance), which is what the distributional
//! tests downstream rely on. When an embedding is not nonnegative definite the
//! generator falls back to a Durbin–Levinson recursion for short sequences and
//! refuses otherwise.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use thiserror::Error;

/// Largest sequence length the generators accept.
pub const MAX_LEN: usize = 1 << 24;

/// Longest irregular FBM grid that the dense Cholesky path will factor.
pub const MAX_IRREGULAR_GRID: usize = 2048;

/// Sequence length bound for the Durbin–Levinson fallback.
pub const MAX_LEVINSON_LEN: usize = 4096;

/// Eigenvalues below this are treated as genuinely negative rather than
/// round-off.
const EIG_TOL: f64 = -1e-10;

#[derive(Debug, Error)]
pub enum FracGaussError {
    #[error("invalid parameter {name}: {value} (want {constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("covariance not nonnegative definite: eigenvalue {eigenvalue:.6e} at index {index}")]
    NotPositiveDefinite { eigenvalue: f64, index: usize },
    #[error("resource limit exceeded: {what} = {got} (max {max})")]
    ResourceLimit {
        what: &'static str,
        got: usize,
        max: usize,
    },
}

/// Stationary zero-mean unit-variance Gaussian sequence family used as the
/// volatility driver of duration models and as a building block for
/// microstructure noise.
#[derive(Debug, Clone, PartialEq)]
pub enum GaussianSpec {
    /// Power-law autocorrelation `rho(k) = c * k^(2h-2)` for `k >= 1`,
    /// `rho(0) = 1`. Requires `h` in (1/2, 1) and `0 < c <= 1`; the resulting
    /// sequence has long memory with Hurst index `h`.
    LongMemory { h: f64, c: f64 },
    /// User-supplied absolutely summable autocovariance, `cov[0]` being the
    /// variance. Lags beyond the vector are zero.
    Summable { cov: Vec<f64> },
}

impl GaussianSpec {
    pub fn validate(&self) -> Result<(), FracGaussError> {
        match self {
            GaussianSpec::LongMemory { h, c } => {
                if !(*h > 0.5 && *h < 1.0) {
                    return Err(FracGaussError::InvalidParameter {
                        name: "h",
                        value: *h,
                        constraint: "1/2 < h < 1",
                    });
                }
                if !(*c > 0.0 && *c <= 1.0) {
                    return Err(FracGaussError::InvalidParameter {
                        name: "c",
                        value: *c,
                        constraint: "0 < c <= 1",
                    });
                }
                Ok(())
            }
            GaussianSpec::Summable { cov } => {
                if cov.is_empty() || !cov[0].is_finite() || cov[0] <= 0.0 {
                    return Err(FracGaussError::InvalidParameter {
                        name: "cov[0]",
                        value: cov.first().copied().unwrap_or(f64::NAN),
                        constraint: "finite variance > 0",
                    });
                }
                if cov.iter().any(|v| !v.is_finite() || v.abs() > cov[0]) {
                    return Err(FracGaussError::InvalidParameter {
                        name: "cov[k]",
                        value: f64::NAN,
                        constraint: "finite, |cov[k]| <= cov[0]",
                    });
                }
                Ok(())
            }
        }
    }

    /// Autocovariance at integer lag.
    pub fn autocov(&self, lag: u64) -> f64 {
        match self {
            GaussianSpec::LongMemory { h, c } => {
                if lag == 0 {
                    1.0
                } else {
                    c * (lag as f64).powf(2.0 * h - 2.0)
                }
            }
            GaussianSpec::Summable { cov } => {
                cov.get(lag as usize).copied().unwrap_or(0.0)
            }
        }
    }

    /// Memory index of the family: `h` for the power-law case, 1/2 for
    /// summable covariances.
    pub fn hurst(&self) -> f64 {
        match self {
            GaussianSpec::LongMemory { h, .. } => *h,
            GaussianSpec::Summable { .. } => 0.5,
        }
    }
}

/// Autocovariance of unit-variance fractional Gaussian noise at unit spacing.
pub fn fgn_autocov(h: f64, lag: u64) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let k = lag as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).powf(e))
}

/// Covariance of fractional Brownian motion: `cov(B_H(s), B_H(t))`.
pub fn fbm_cov(h: f64, s: f64, t: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (s.abs().powf(e) + t.abs().powf(e) - (t - s).abs().powf(e))
}

/// Probabilists' Hermite polynomial `H_j(y)` (so `H_2 = y^2 - 1`,
/// `H_3 = y^3 - 3y`).
pub fn hermite(order: u32, y: f64) -> f64 {
    match order {
        0 => 1.0,
        1 => y,
        _ => {
            let mut prev = 1.0;
            let mut cur = y;
            for k in 1..order {
                let next = y * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

fn check_len(n: usize) -> Result<(), FracGaussError> {
    if n == 0 {
        return Err(FracGaussError::InvalidParameter {
            name: "n",
            value: 0.0,
            constraint: "n >= 1",
        });
    }
    if n > MAX_LEN {
        return Err(FracGaussError::ResourceLimit {
            what: "sequence length",
            got: n,
            max: MAX_LEN,
        });
    }
    Ok(())
}

/// Exact sample of a stationary Gaussian sequence with the given
/// autocovariance function, via circulant embedding with a Durbin–Levinson
/// fallback for short sequences.
fn stationary_gaussian<R: Rng + ?Sized>(
    acov: &dyn Fn(u64) -> f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>, FracGaussError> {
    check_len(n)?;
    if n == 1 {
        let z: f64 = rng.sample(StandardNormal);
        return Ok(vec![acov(0).sqrt() * z]);
    }

    let m = (2 * (n - 1)).next_power_of_two().max(4);
    let half = m / 2;

    // First row of the circulant embedding; one forward FFT gives its
    // eigenvalues (real by symmetry).
    let mut row: Vec<Complex64> = Vec::with_capacity(m);
    for k in 0..m {
        let lag = k.min(m - k) as u64;
        row.push(Complex64::new(acov(lag), 0.0));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);

    let mut eigs = Vec::with_capacity(m);
    let mut min_eig = f64::INFINITY;
    let mut min_idx = 0;
    for (i, v) in row.iter().enumerate() {
        if v.re < min_eig {
            min_eig = v.re;
            min_idx = i;
        }
        eigs.push(v.re.max(0.0));
    }
    if min_eig < EIG_TOL {
        if n <= MAX_LEVINSON_LEN {
            return levinson_sample(acov, n, rng);
        }
        return Err(FracGaussError::NotPositiveDefinite {
            eigenvalue: min_eig,
            index: min_idx,
        });
    }

    // Hermitian complex-Gaussian spectrum with variances eigs/M; a second
    // forward FFT turns it into a real sample with the target covariance.
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    let z0: f64 = rng.sample(StandardNormal);
    spec[0] = Complex64::new((eigs[0] / m as f64).sqrt() * z0, 0.0);
    let zh: f64 = rng.sample(StandardNormal);
    spec[half] = Complex64::new((eigs[half] / m as f64).sqrt() * zh, 0.0);
    for k in 1..half {
        let sd = (eigs[k] / (2.0 * m as f64)).sqrt();
        let u: f64 = rng.sample(StandardNormal);
        let v: f64 = rng.sample(StandardNormal);
        spec[k] = Complex64::new(sd * u, sd * v);
        spec[m - k] = spec[k].conj();
    }
    fft.process(&mut spec);
    Ok(spec.iter().take(n).map(|z| z.re).collect())
}

/// Durbin–Levinson sampler: the progressive form of the Toeplitz Cholesky
/// factorization. Exact, O(n^2), used only when the embedding fails.
fn levinson_sample<R: Rng + ?Sized>(
    acov: &dyn Fn(u64) -> f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>, FracGaussError> {
    if n > MAX_LEVINSON_LEN {
        return Err(FracGaussError::ResourceLimit {
            what: "Durbin-Levinson length",
            got: n,
            max: MAX_LEVINSON_LEN,
        });
    }
    let gamma: Vec<f64> = (0..n as u64).map(acov).collect();
    if gamma[0] <= 0.0 {
        return Err(FracGaussError::NotPositiveDefinite {
            eigenvalue: gamma[0],
            index: 0,
        });
    }
    let mut x = Vec::with_capacity(n);
    let z0: f64 = rng.sample(StandardNormal);
    x.push(gamma[0].sqrt() * z0);
    let mut phi: Vec<f64> = Vec::new();
    let mut var = gamma[0];
    for k in 1..n {
        // phi holds the order-(k-1) prediction coefficients.
        let mut refl = gamma[k];
        for (j, &p) in phi.iter().enumerate() {
            refl -= p * gamma[k - 1 - j];
        }
        refl /= var;
        let prev = phi.clone();
        phi.push(0.0);
        for j in 0..prev.len() {
            phi[j] = prev[j] - refl * prev[prev.len() - 1 - j];
        }
        *phi.last_mut().unwrap() = refl;
        var *= 1.0 - refl * refl;
        if !(var > 0.0) {
            return Err(FracGaussError::NotPositiveDefinite {
                eigenvalue: var,
                index: k,
            });
        }
        let mut mean = 0.0;
        for (j, &p) in phi.iter().enumerate() {
            mean += p * x[k - 1 - j];
        }
        let z: f64 = rng.sample(StandardNormal);
        x.push(mean + var.sqrt() * z);
    }
    Ok(x)
}

/// Unit-variance fractional Gaussian noise at unit spacing, `h` in (0, 1).
/// Partial sums reproduce fractional Brownian motion at integer times
/// exactly in law.
pub fn fgn<R: Rng + ?Sized>(h: f64, n: usize, rng: &mut R) -> Result<Vec<f64>, FracGaussError> {
    if !(h > 0.0 && h < 1.0) {
        return Err(FracGaussError::InvalidParameter {
            name: "h",
            value: h,
            constraint: "0 < h < 1",
        });
    }
    stationary_gaussian(&|k| fgn_autocov(h, k), n, rng)
}

/// Sample of the stationary Gaussian family described by `spec`.
pub fn gen_long_memory_gaussian<R: Rng + ?Sized>(
    spec: &GaussianSpec,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>, FracGaussError> {
    spec.validate()?;
    stationary_gaussian(&|k| spec.autocov(k), n, rng)
}

/// Increments of fractional Brownian motion over consecutive windows of
/// width `dt`: an fGn sample scaled by `dt^h`. Length `n`.
pub fn fbm_increments<R: Rng + ?Sized>(
    h: f64,
    n: usize,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<f64>, FracGaussError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FracGaussError::InvalidParameter {
            name: "dt",
            value: dt,
            constraint: "finite, > 0",
        });
    }
    let scale = dt.powf(h);
    Ok(fgn(h, n, rng)?.into_iter().map(|x| scale * x).collect())
}

/// Sampling grid for [`gen_fbm`].
#[derive(Debug, Clone, PartialEq)]
pub enum FbmGrid {
    /// `n` equal steps covering `[0, t_max]`.
    Equispaced { n: usize, t_max: f64 },
    /// Strictly increasing positive times; kept short because the sampler
    /// factors the dense covariance matrix.
    Irregular { times: Vec<f64> },
}

/// Fractional Brownian motion on the grid. For an equispaced grid the result
/// has length `n + 1` and starts with `B_H(0) = 0`; for an irregular grid it
/// holds the values at the given times only.
pub fn gen_fbm<R: Rng + ?Sized>(
    h: f64,
    grid: &FbmGrid,
    rng: &mut R,
) -> Result<Vec<f64>, FracGaussError> {
    if !(h > 0.0 && h < 1.0) {
        return Err(FracGaussError::InvalidParameter {
            name: "h",
            value: h,
            constraint: "0 < h < 1",
        });
    }
    match grid {
        FbmGrid::Equispaced { n, t_max } => {
            if !(*t_max > 0.0 && t_max.is_finite()) {
                return Err(FracGaussError::InvalidParameter {
                    name: "t_max",
                    value: *t_max,
                    constraint: "finite, > 0",
                });
            }
            let incr = fbm_increments(h, *n, t_max / *n as f64, rng)?;
            let mut out = Vec::with_capacity(n + 1);
            out.push(0.0);
            let mut acc = 0.0;
            for d in incr {
                acc += d;
                out.push(acc);
            }
            Ok(out)
        }
        FbmGrid::Irregular { times } => {
            let m = times.len();
            if m == 0 {
                return Err(FracGaussError::InvalidParameter {
                    name: "times",
                    value: 0.0,
                    constraint: "nonempty grid",
                });
            }
            if m > MAX_IRREGULAR_GRID {
                return Err(FracGaussError::ResourceLimit {
                    what: "irregular grid length",
                    got: m,
                    max: MAX_IRREGULAR_GRID,
                });
            }
            let increasing = times.windows(2).all(|w| w[0] < w[1]);
            if !increasing || times[0] <= 0.0 || times.iter().any(|t| !t.is_finite()) {
                return Err(FracGaussError::InvalidParameter {
                    name: "times",
                    value: times[0],
                    constraint: "strictly increasing, positive, finite",
                });
            }
            let mut cov = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..=i {
                    let v = fbm_cov(h, times[i], times[j]);
                    cov[i * m + j] = v;
                    cov[j * m + i] = v;
                }
            }
            let chol = cholesky_lower(&cov, m)?;
            let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let mut out = vec![0.0; m];
            for i in 0..m {
                let mut acc = 0.0;
                for j in 0..=i {
                    acc += chol[i * m + j] * z[j];
                }
                out[i] = acc;
            }
            Ok(out)
        }
    }
}

/// Dense lower Cholesky factor of a symmetric positive definite matrix in
/// row-major order.
fn cholesky_lower(a: &[f64], m: usize) -> Result<Vec<f64>, FracGaussError> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(FracGaussError::NotPositiveDefinite {
                        eigenvalue: s,
                        index: i,
                    });
                }
                l[i * m + j] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    Ok(l)
}
