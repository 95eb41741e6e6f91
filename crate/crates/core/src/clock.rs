//! Event clocks: counting processes built from durations, plus deterministic
//! time deformations (intraday seasonality, trading sessions).
//!
//! A clock stores the event times `t_1 <= t_2 <= ...` and answers
//! `N(t) = #{k : t_k <= t}` and the forward recurrence time
//! `A(t) = t_{N(t)+1} - t` in `O(log n)`. Ties are allowed, so the counting
//! process need not be simple.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClockError {
    #[error("invalid parameter {name}: {value} (want {constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("event times must be nonnegative and nondecreasing (index {index})")]
    UnorderedTimes { index: usize },
    #[error("clock ends at {last} but {needed} is required")]
    TooShort { last: f64, needed: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventClock {
    times: Vec<f64>,
}

impl EventClock {
    /// Builds a clock from explicit event times (nonnegative, nondecreasing).
    pub fn from_times(times: Vec<f64>) -> Result<Self, ClockError> {
        let mut prev = 0.0f64;
        for (index, t) in times.iter().enumerate() {
            if !(*t >= prev) || !t.is_finite() {
                return Err(ClockError::UnorderedTimes { index });
            }
            prev = *t;
        }
        Ok(EventClock { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `N(t)`: the number of events at or before `t`.
    pub fn count(&self, t: f64) -> usize {
        self.times.partition_point(|x| *x <= t)
    }

    /// `t_k` with 1-based `k`; `t_0 = 0` by convention.
    pub fn event_time(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.times[k - 1]
        }
    }

    /// Forward recurrence time `A(t) = t_{N(t)+1} - t`, or `None` when no
    /// event lies strictly after `t`.
    pub fn forward_recurrence(&self, t: f64) -> Option<f64> {
        let idx = self.count(t);
        self.times.get(idx).map(|next| next - t)
    }
}

/// Builds a clock by accumulating durations: `t_k = tau_1 + ... + tau_k`.
/// Durations must be nonnegative; zeros produce simultaneous events.
pub fn clock_from_durations(durations: &[f64]) -> Result<EventClock, ClockError> {
    let mut times = Vec::with_capacity(durations.len());
    let mut acc = 0.0f64;
    for (index, tau) in durations.iter().enumerate() {
        if !(*tau >= 0.0) || !tau.is_finite() {
            return Err(ClockError::UnorderedTimes { index });
        }
        acc += tau;
        times.push(acc);
    }
    Ok(EventClock { times })
}

/// A deterministic, nondecreasing change of time `f` mapping calendar time to
/// operational time. A clock with operational event times `s_k` observed in
/// calendar time has events at `t_k = f_inverse(s_k)` and count
/// `N(t) = N_op(f(t))`.
#[derive(Debug, Clone, PartialEq)]
pub enum DeformationSpec {
    /// `f(t) = t + amplitude * sin(2 pi t / period)`. Strictly increasing
    /// when `2 pi amplitude / period < 1`; averages to the identity over a
    /// period.
    Seasonal { amplitude: f64, period: f64 },
    /// Piecewise-linear `f` through `(t, f(t))` knots, extended beyond the
    /// last knot with the final slope. Flat segments model nontrading
    /// periods; the final slope must be positive so the inverse is defined
    /// for all operational times.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl DeformationSpec {
    pub fn validate(&self) -> Result<(), ClockError> {
        match self {
            DeformationSpec::Seasonal { amplitude, period } => {
                if !(*period > 0.0 && period.is_finite()) {
                    return Err(ClockError::InvalidParameter {
                        name: "period",
                        value: *period,
                        constraint: "finite, > 0",
                    });
                }
                if !(*amplitude >= 0.0) || !amplitude.is_finite() {
                    return Err(ClockError::InvalidParameter {
                        name: "amplitude",
                        value: *amplitude,
                        constraint: "finite, >= 0",
                    });
                }
                let slope_margin = 2.0 * std::f64::consts::PI * amplitude / period;
                if slope_margin >= 1.0 - 1e-6 {
                    return Err(ClockError::InvalidParameter {
                        name: "2*pi*amplitude/period",
                        value: slope_margin,
                        constraint: "< 1 (strict monotonicity)",
                    });
                }
                Ok(())
            }
            DeformationSpec::PiecewiseLinear { knots } => {
                if knots.len() < 2 {
                    return Err(ClockError::InvalidParameter {
                        name: "knots",
                        value: knots.len() as f64,
                        constraint: ">= 2 knots",
                    });
                }
                for w in knots.windows(2) {
                    let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                    if !(x1 > x0) || !(y1 >= y0) || !x1.is_finite() || !y1.is_finite() {
                        return Err(ClockError::InvalidParameter {
                            name: "knots",
                            value: x1,
                            constraint: "t strictly increasing, f nondecreasing",
                        });
                    }
                }
                let (xa, ya) = knots[knots.len() - 2];
                let (xb, yb) = knots[knots.len() - 1];
                if !((yb - ya) / (xb - xa) > 0.0) {
                    return Err(ClockError::InvalidParameter {
                        name: "final slope",
                        value: (yb - ya) / (xb - xa),
                        constraint: "> 0",
                    });
                }
                Ok(())
            }
        }
    }

    /// `f(t)`.
    pub fn apply(&self, t: f64) -> f64 {
        match self {
            DeformationSpec::Seasonal { amplitude, period } => {
                t + amplitude * (2.0 * std::f64::consts::PI * t / period).sin()
            }
            DeformationSpec::PiecewiseLinear { knots } => {
                let idx = knots.partition_point(|(x, _)| *x <= t);
                let (i0, i1) = if idx == 0 {
                    (0, 1)
                } else if idx == knots.len() {
                    (knots.len() - 2, knots.len() - 1)
                } else {
                    (idx - 1, idx)
                };
                let (x0, y0) = knots[i0];
                let (x1, y1) = knots[i1];
                y0 + (y1 - y0) / (x1 - x0) * (t - x0)
            }
        }
    }

    /// Generalized inverse `inf { t : f(t) >= u }`. For the strictly
    /// increasing seasonal map this is the ordinary inverse, computed by
    /// bisection to absolute tolerance 1e-12.
    pub fn inverse(&self, u: f64) -> f64 {
        match self {
            DeformationSpec::Seasonal { amplitude, .. } => {
                // f(t) - t is bounded by the amplitude.
                let mut lo = u - amplitude;
                let mut hi = u + amplitude;
                if self.apply(lo) >= u {
                    return lo;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.apply(mid) >= u {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-13 {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
            DeformationSpec::PiecewiseLinear { knots } => {
                if u <= knots[0].1 {
                    return knots[0].0;
                }
                let idx = knots.partition_point(|(_, y)| *y < u);
                let (i0, i1) = if idx >= knots.len() {
                    (knots.len() - 2, knots.len() - 1)
                } else {
                    (idx - 1, idx)
                };
                let (x0, y0) = knots[i0];
                let (x1, y1) = knots[i1];
                // The segment has positive slope: a flat segment cannot
                // contain u strictly between its endpoint values.
                x0 + (u - y0) * (x1 - x0) / (y1 - y0)
            }
        }
    }

    /// Long-run mean slope of `f` (one for the seasonal map, the chord slope
    /// for piecewise-linear maps). Arrival intensities in calendar time are
    /// the operational intensities times this factor.
    pub fn mean_slope(&self) -> f64 {
        match self {
            DeformationSpec::Seasonal { .. } => 1.0,
            DeformationSpec::PiecewiseLinear { knots } => {
                let (x0, y0) = knots[0];
                let (x1, y1) = knots[knots.len() - 1];
                (y1 - y0) / (x1 - x0)
            }
        }
    }
}

/// Validated intraday seasonal deformation.
pub fn intraday_seasonal_spec(amplitude: f64, period: f64) -> Result<DeformationSpec, ClockError> {
    let spec = DeformationSpec::Seasonal { amplitude, period };
    spec.validate()?;
    Ok(spec)
}

/// Maps a clock with operational event times into calendar time:
/// `t_k = f_inverse(s_k)`. The result satisfies `N(t) = N_op(f(t))`.
pub fn deform_clock(operational: &EventClock, spec: &DeformationSpec) -> Result<EventClock, ClockError> {
    spec.validate()?;
    let times = operational
        .times()
        .iter()
        .map(|s| spec.inverse(*s))
        .collect();
    EventClock::from_times(times)
}

/// Largest mean forward recurrence time over a probe grid:
/// `max_s mean_clocks A(s)` for `probes` equispaced probe points in
/// `(0, horizon]`. Errors if any clock has no event beyond the horizon.
pub fn forward_recurrence_moment(
    clocks: &[EventClock],
    horizon: f64,
    probes: usize,
) -> Result<f64, ClockError> {
    if !(horizon > 0.0) || probes == 0 || clocks.is_empty() {
        return Err(ClockError::InvalidParameter {
            name: "horizon/probes/clocks",
            value: horizon,
            constraint: "horizon > 0, probes >= 1, clocks nonempty",
        });
    }
    let mut worst = f64::MIN;
    for i in 0..probes {
        let s = horizon * (i + 1) as f64 / probes as f64;
        let mut acc = 0.0;
        for clock in clocks {
            match clock.forward_recurrence(s) {
                Some(a) => acc += a,
                None => {
                    return Err(ClockError::TooShort {
                        last: clock.times().last().copied().unwrap_or(0.0),
                        needed: s,
                    })
                }
            }
        }
        worst = worst.max(acc / clocks.len() as f64);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::durations::gen_iid_durations;
    use crate::rng::derive_rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn counting_and_recurrence_frozen() {
        let clock = clock_from_durations(&[0.5, 0.2, 1.3]).unwrap();
        assert_eq!(clock.times(), &[0.5, 0.7, 2.0]);
        assert_eq!(clock.count(0.0), 0);
        assert_eq!(clock.count(0.6), 1);
        assert_relative_eq!(clock.forward_recurrence(0.6).unwrap(), 0.1, epsilon = 1e-12);
        // Counting is inclusive at event times.
        assert_eq!(clock.count(0.7), 2);
        assert_relative_eq!(clock.forward_recurrence(0.7).unwrap(), 1.3, epsilon = 1e-12);
        assert_eq!(clock.count(2.0), 3);
        assert!(clock.forward_recurrence(2.0).is_none());
        assert_eq!(clock.event_time(0), 0.0);
        assert_eq!(clock.event_time(2), 0.7);
    }

    #[test]
    fn ties_are_counted_together() {
        let clock = clock_from_durations(&[0.5, 0.0, 0.3]).unwrap();
        assert_eq!(clock.count(0.5), 2);
        assert_eq!(clock.count(0.79), 2);
        assert_eq!(clock.count(0.8), 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(clock_from_durations(&[0.1, -0.2]).is_err());
        assert!(EventClock::from_times(vec![0.3, 0.2]).is_err());
        assert!(EventClock::from_times(vec![-0.1]).is_err());
        assert!(EventClock::from_times(vec![0.2, 0.2]).is_ok());
    }

    #[test]
    fn seasonal_frozen_values() {
        let spec = intraday_seasonal_spec(0.1, 1.0).unwrap();
        // sin(pi/2) = 1 at t = 0.25.
        assert_relative_eq!(spec.apply(0.25), 0.35, epsilon = 1e-12);
        assert_relative_eq!(spec.inverse(0.35), 0.25, epsilon = 1e-10);
        assert_relative_eq!(spec.mean_slope(), 1.0, epsilon = 1e-12);
        // 2 pi * 0.2 > 1: not invertible.
        assert!(intraday_seasonal_spec(0.2, 1.0).is_err());
    }

    #[test]
    fn piecewise_frozen_values() {
        let spec = DeformationSpec::PiecewiseLinear {
            knots: vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 2.0)],
        };
        spec.validate().unwrap();
        assert_relative_eq!(spec.apply(1.5), 1.0, epsilon = 1e-12);
        assert_relative_eq!(spec.apply(2.5), 1.5, epsilon = 1e-12);
        // Extrapolation past the last knot keeps the final slope.
        assert_relative_eq!(spec.apply(4.0), 3.0, epsilon = 1e-12);
        // The generalized inverse jumps across the flat segment.
        assert_relative_eq!(spec.inverse(1.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(spec.inverse(1.5), 2.5, epsilon = 1e-12);
        assert_relative_eq!(spec.inverse(0.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(spec.mean_slope(), 2.0 / 3.0, epsilon = 1e-12);

        let flat_tail = DeformationSpec::PiecewiseLinear {
            knots: vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)],
        };
        assert!(flat_tail.validate().is_err());
    }

    #[test]
    fn deformed_clock_counts_compose() {
        let mut rng = derive_rng(31, &[1]);
        let durations = gen_iid_durations(1.0, 400, &mut rng).unwrap();
        let operational = clock_from_durations(&durations).unwrap();
        let spec = intraday_seasonal_spec(0.12, 1.0).unwrap();
        let observed = deform_clock(&operational, &spec).unwrap();
        for i in 0..250 {
            let t = 0.37 + 1.03 * i as f64;
            assert_eq!(
                observed.count(t),
                operational.count(spec.apply(t)),
                "composition at t = {t}"
            );
        }
    }

    #[test]
    fn recurrence_moment_near_poisson_mean() {
        // For a unit-rate Poisson process E[A(s)] = 1 at every s.
        let mut clocks = Vec::new();
        for rep in 0..2000u64 {
            let mut rng = derive_rng(32, &[rep]);
            let d = gen_iid_durations(1.0, 40, &mut rng).unwrap();
            clocks.push(clock_from_durations(&d).unwrap());
        }
        let m = forward_recurrence_moment(&clocks, 5.0, 256).unwrap();
        assert!((0.9..1.2).contains(&m), "max mean recurrence {m}");
    }

    #[test]
    fn recurrence_moment_requires_coverage() {
        let clocks = vec![clock_from_durations(&[0.5, 0.5]).unwrap()];
        assert!(forward_recurrence_moment(&clocks, 2.0, 8).is_err());
    }

    proptest! {
        #[test]
        fn count_event_duality(
            durations in proptest::collection::vec(0.0f64..2.0, 1..60),
            frac in 0.0f64..1.0,
        ) {
            let clock = clock_from_durations(&durations).unwrap();
            let total: f64 = durations.iter().sum();
            let t = frac * (total + 1.0);
            let k = clock.count(t);
            // N(t) = k exactly when t_k <= t < t_{k+1}.
            if k > 0 {
                prop_assert!(clock.event_time(k) <= t);
            }
            if k < clock.len() {
                prop_assert!(clock.times()[k] > t);
                let a = clock.forward_recurrence(t).unwrap();
                prop_assert!(a > 0.0);
                prop_assert!((clock.times()[k] - (t + a)).abs() < 1e-9);
            }
        }

        #[test]
        fn galois_inequalities(
            amplitude in 0.0f64..0.15,
            t in 0.0f64..20.0,
            u in 0.0f64..20.0,
        ) {
            let spec = intraday_seasonal_spec(amplitude, 1.0).unwrap();
            let fwd = spec.apply(t);
            let inv = spec.inverse(u);
            // f_inverse(f(t)) = t and f(f_inverse(u)) = u for the strictly
            // increasing seasonal map, up to the bisection tolerance.
            prop_assert!((spec.inverse(fwd) - t).abs() < 1e-9);
            prop_assert!((spec.apply(inv) - u).abs() < 1e-9);
        }

        #[test]
        fn piecewise_galois(
            u in 0.0f64..3.0,
            t in 0.0f64..4.0,
        ) {
            let spec = DeformationSpec::PiecewiseLinear {
                knots: vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 2.0)],
            };
            // Generalized-inverse Galois pair: f(t) >= u iff t >= f_inverse(u).
            let inv = spec.inverse(u);
            prop_assert!(spec.apply(inv) >= u - 1e-12);
            if spec.apply(t) >= u {
                prop_assert!(t >= inv - 1e-12);
            } else {
                prop_assert!(t <= inv + 1e-12);
            }
        }
    }
}
