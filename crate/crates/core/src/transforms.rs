//! Monotone path transforms, drift compensation and stochastic exponentials,
//! plus a harness that compares verdicts before and after a transform.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::process::realized_quadratic_variation;
use crate::scalar::{Real, Scalar};
use crate::star::{star_scan, StarConfig, StarProbe, StarVerdict};
use crate::strategy::{search_single_leg, ArbitrageVerdict, LegCandidate, Tolerances};

#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneMap<T> {
    /// `x -> alpha x + beta`; increasing for `alpha > 0`.
    Affine {
        alpha: T,
        beta: T,
    },
    Exp,
    /// Natural log on `(0, inf)`.
    Log,
    /// `x -> x^p` on `[0, inf)`, `p > 0`.
    Power(T),
    /// `x -> x^(-q)` on `(0, inf)`, `q > 0`; strictly decreasing.
    NegPower(T),
    /// Linear interpolation through `(x, y)` knots, extended linearly past the
    /// first and last knot.
    PiecewiseLinear {
        knots: Vec<(T, T)>,
        strict: bool,
    },
}

impl<T: Scalar> MonotoneMap<T> {
    pub fn identity() -> Self {
        Self::Affine {
            alpha: T::one(),
            beta: T::zero(),
        }
    }

    pub fn piecewise_linear(knots: Vec<(T, T)>, strict: bool) -> Result<Self> {
        let map = Self::PiecewiseLinear { knots, strict };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Affine { alpha, .. } if *alpha == T::zero() => {
                Err(Error::Parameter("affine map needs alpha != 0".into()))
            }
            Self::Power(p) if *p <= T::zero() => Err(Error::Parameter(format!("power {p} must be positive"))),
            Self::NegPower(q) if *q <= T::zero() => Err(Error::Parameter(format!(
                "negative power exponent {q} must be positive"
            ))),
            Self::PiecewiseLinear { knots, strict } => {
                if knots.len() < 2 {
                    return Err(Error::Parameter("piecewise-linear map needs at least two knots".into()));
                }
                for w in knots.windows(2) {
                    let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                    if x1 <= x0 {
                        return Err(Error::Parameter(format!("knot abscissae not increasing at {x1}")));
                    }
                    if y1 < y0 || (*strict && y1 == y0) {
                        return Err(Error::Parameter(format!(
                            "knot values not {} at {x1}",
                            if *strict {
                                "strictly increasing"
                            } else {
                                "nondecreasing"
                            }
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        match self {
            Self::Affine { alpha, .. } => *alpha > T::zero(),
            Self::Exp | Self::Log | Self::Power(_) => true,
            Self::NegPower(_) => false,
            Self::PiecewiseLinear { strict, .. } => *strict,
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.is_strictly_increasing() || matches!(self, Self::PiecewiseLinear { .. })
    }

    pub fn apply(&self, x: T) -> Result<T> {
        let domain = |what: &str| Error::Domain(format!("{self} undefined at {x}: {what}"));
        match self {
            Self::Affine { alpha, beta } => Ok(*alpha * x + *beta),
            Self::Exp => x.try_exp().ok_or_else(|| domain("no representable exponential")),
            Self::Log => {
                if x <= T::zero() {
                    return Err(domain("needs a positive argument"));
                }
                x.try_ln().ok_or_else(|| domain("no representable logarithm"))
            }
            Self::Power(p) => {
                if x < T::zero() {
                    return Err(domain("needs a nonnegative argument"));
                }
                if *p == T::one() {
                    return Ok(x);
                }
                x.try_powf(*p).ok_or_else(|| domain("no representable power"))
            }
            Self::NegPower(q) => {
                if x <= T::zero() {
                    return Err(domain("needs a positive argument"));
                }
                if *q == T::one() {
                    return Ok(T::one() / x);
                }
                x.try_powf(-*q).ok_or_else(|| domain("no representable power"))
            }
            Self::PiecewiseLinear { knots, .. } => {
                let seg = knots.windows(2).position(|w| x <= w[1].0).unwrap_or(knots.len() - 2);
                let ((x0, y0), (x1, y1)) = (knots[seg], knots[seg + 1]);
                Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
            }
        }
    }

    /// Largest increase of the map over any window of width `delta` inside
    /// `[lo, hi]`. Every supported map is linear, convex or concave between
    /// knots, so the supremum sits at an end of the range or at a knot.
    pub fn modulus(&self, delta: T, lo: T, hi: T) -> Result<T> {
        if let Self::Affine { alpha, .. } = self {
            return Ok(alpha.abs() * delta);
        }
        if hi - lo <= delta {
            return Ok((self.apply(hi)? - self.apply(lo)?).abs());
        }
        let mut starts = vec![lo, hi - delta];
        if let Self::PiecewiseLinear { knots, .. } = self {
            for &(k, _) in knots {
                starts.push(k);
                starts.push(k - delta);
            }
        }
        let mut best = T::zero();
        for s in starts {
            if s < lo || s > hi - delta {
                continue;
            }
            best = best.max_of((self.apply(s + delta)? - self.apply(s)?).abs());
        }
        Ok(best)
    }
}

impl<T: Scalar> fmt::Display for MonotoneMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Affine { alpha, beta } => write!(f, "affine({alpha}, {beta})"),
            Self::Exp => f.write_str("exp"),
            Self::Log => f.write_str("log"),
            Self::Power(p) => write!(f, "power({p})"),
            Self::NegPower(q) => write!(f, "neg_power({q})"),
            Self::PiecewiseLinear { knots, strict } => {
                f.write_str(if *strict { "piecewise_strict(" } else { "piecewise(" })?;
                for (i, (x, y)) in knots.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{x}:{y}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Applies `map` to every value; grid and weights are kept.
pub fn apply_monotone<T: Scalar>(map: &MonotoneMap<T>, ensemble: &PathEnsemble<T>) -> Result<PathEnsemble<T>> {
    map.validate()?;
    let n = ensemble.n_times();
    let grid = ensemble.grid();
    let rows: Vec<Vec<T>> = ensemble
        .values()
        .par_chunks(n)
        .enumerate()
        .map(|(i, path)| {
            path.iter()
                .enumerate()
                .map(|(k, &x)| {
                    map.apply(x).map_err(|e| match e {
                        Error::Domain(msg) => Error::Domain(format!("path {i}, t = {}: {msg}", grid.time(k))),
                        other => other,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    ensemble
        .with_values(rows.concat())
        .map(|e| e.with_metadata("transform", map.to_string()))
}

/// `X - [X, X] / 2` with the realized quadratic variation.
pub fn drift_compensate<T: Scalar>(ensemble: &PathEnsemble<T>) -> Result<PathEnsemble<T>> {
    let qv = realized_quadratic_variation(ensemble)?;
    let two = T::one() + T::one();
    let values = ensemble
        .values()
        .iter()
        .zip(qv.values())
        .map(|(&x, &q)| x - q / two)
        .collect();
    ensemble
        .with_values(values)
        .map(|e| e.with_metadata("transform", "drift compensated"))
}

/// `exp(X - [X, X] / 2)`.
pub fn stochastic_exponential<T: Real>(ensemble: &PathEnsemble<T>) -> Result<PathEnsemble<T>> {
    let log = drift_compensate(ensemble)?;
    let n = ensemble.n_times();
    let values = log
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &l)| {
            let y = l.exp();
            if y.is_finite() {
                Ok(y)
            } else {
                Err(Error::Domain(format!(
                    "stochastic exponential overflows on path {} at index {} (log value {l})",
                    idx / n,
                    idx % n
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ensemble
        .with_values(values)
        .map(|e| e.with_metadata("transform", "stochastic exponential"))
}

/// Random strictly increasing piecewise-linear map with knots spread over
/// `[lo - 1, hi + 1]` and slopes drawn from `{1/2, 1, ..., 3}`.
pub fn random_increasing_map<T: Scalar, R: Rng + ?Sized>(rng: &mut R, lo: T, hi: T) -> MonotoneMap<T> {
    let int = |v: i64| T::from_i64(v).unwrap();
    let n = rng.random_range(3..=5usize);
    let start = lo - T::one();
    let step = (hi - lo + int(2)) / int(n as i64 - 1);
    let mut knots = Vec::with_capacity(n);
    let mut y = int(rng.random_range(-2..=2));
    for k in 0..n {
        let x = start + step * int(k as i64);
        if k > 0 {
            let slope = int(rng.random_range(1..=6)) / int(2);
            y = y + slope * step;
        }
        knots.push((x, y));
    }
    MonotoneMap::PiecewiseLinear { knots, strict: true }
}

/// Which verdict to compare before and after a transform.
#[derive(Debug, Clone)]
pub enum InvarianceCheck<T> {
    StarScan {
        probes: Vec<StarProbe<T>>,
        config: StarConfig,
    },
    LongOnlySearch {
        family: Vec<LegCandidate<T>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceRecord {
    pub check: &'static str,
    pub map: String,
    pub before: String,
    pub after: String,
    pub pass: bool,
    /// Star probabilities `(before, after)` per probe and epsilon.
    pub p_hat_pairs: Vec<(f64, f64)>,
    /// True when the map is affine, so probabilities should agree exactly.
    pub exact_probabilities: bool,
}

pub fn invariance_report<T: Scalar>(
    check: &InvarianceCheck<T>,
    map: &MonotoneMap<T>,
    ensemble: &PathEnsemble<T>,
) -> Result<InvarianceRecord> {
    map.validate()?;
    let mapped = apply_monotone(map, ensemble)?;
    let level = |x: T| map.apply(x);
    let affine = matches!(map, MonotoneMap::Affine { .. });
    match check {
        InvarianceCheck::LongOnlySearch { family } => {
            if !map.is_strictly_increasing() {
                return Err(Error::Argument(format!(
                    "long-only comparison needs a strictly increasing map, got {map}"
                )));
            }
            let (lo, hi) = (ensemble.min_value(), ensemble.max_value());
            let eps = |e: T| remap_epsilon(map, e, lo, hi);
            let moved = family
                .iter()
                .map(|c| c.map_levels(&level, &eps))
                .collect::<Result<Vec<_>>>()?;
            let before = search_single_leg(ensemble, family, true, Tolerances::for_ensemble(ensemble))?;
            let after = search_single_leg(&mapped, &moved, true, Tolerances::for_ensemble(&mapped))?;
            let (b, a) = (before.verdict(), after.verdict());
            Ok(InvarianceRecord {
                check: "long-only-search",
                map: map.to_string(),
                before: b.to_string(),
                after: a.to_string(),
                pass: (b == ArbitrageVerdict::Arbitrage) == (a == ArbitrageVerdict::Arbitrage),
                p_hat_pairs: Vec::new(),
                exact_probabilities: affine,
            })
        }
        InvarianceCheck::StarScan { probes, config } => {
            if !map.is_nondecreasing() {
                return Err(Error::Argument(format!(
                    "star comparison needs a nondecreasing map, got {map}"
                )));
            }
            let (lo, hi) = (ensemble.min_value(), ensemble.max_value());
            let eps = |e: T| remap_epsilon(map, e, lo, hi);
            let moved = probes
                .iter()
                .map(|p| {
                    Ok(StarProbe::new(
                        p.tau.map_levels(&level, &eps)?,
                        p.event.map_levels(&level, &eps)?,
                        p.horizon,
                        p.epsilons.iter().map(|&e| eps(e)).collect::<Result<_>>()?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let before = star_scan(ensemble, probes, *config)?;
            let after = star_scan(&mapped, &moved, *config)?;
            let p_hat_pairs = before
                .reports
                .iter()
                .zip(&after.reports)
                .flat_map(|(b, a)| b.entries.iter().zip(&a.entries).map(|(x, y)| (x.p_hat, y.p_hat)))
                .collect();
            let flagged = |v: StarVerdict| v == StarVerdict::ViolationSuspected;
            Ok(InvarianceRecord {
                check: "star-scan",
                map: map.to_string(),
                before: before.verdict.to_string(),
                after: after.verdict.to_string(),
                pass: flagged(before.verdict) == flagged(after.verdict),
                p_hat_pairs,
                exact_probabilities: affine,
            })
        }
    }
}

/// Drop size on the transformed scale matching a drop of `eps` on the
/// original scale: `alpha eps` for affine maps, otherwise the modulus of
/// continuity over `[lo, hi]` with a small relative margin for rounding.
pub fn remap_epsilon<T: Scalar>(map: &MonotoneMap<T>, eps: T, lo: T, hi: T) -> Result<T> {
    let w = map.modulus(eps, lo, hi)?;
    if T::EXACT || matches!(map, MonotoneMap::Affine { .. }) {
        return Ok(w);
    }
    let margin = T::from_f64(2f64.powi(-20)).unwrap_or_else(T::zero);
    Ok(w + w * margin + eps * margin)
}
