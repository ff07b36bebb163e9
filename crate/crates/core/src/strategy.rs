//! Simple trading strategies, their gains, and arbitrage verdicts.
//!
//! A strategy is a list of legs `(entry, exit, weight)`; the position over
//! `(entry, exit]` is the weight, which must be known at the entry time. The
//! time-zero holding in the numéraire earns nothing (the bond is constant) and
//! is not represented.

use std::fmt;

use rayon::prelude::*;

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::scalar::Scalar;
use crate::stopping::{EventPredicate, StoppingRule};

#[derive(Debug, Clone, PartialEq)]
pub enum WeightRule<T> {
    Constant(T),
    /// `c * 1_A`.
    IndicatorTimes(EventPredicate<T>, T),
    /// `c * 1{sum of the prior legs' gains < 0}`.
    PartialSumBelowZero {
        prior: Vec<Leg<T>>,
        scale: T,
    },
    /// `c * 1{inner > 0}`.
    PositivePart {
        inner: Box<WeightRule<T>>,
        scale: T,
    },
    /// Value keyed by the path prefix up to the entry index; 0 if unlisted.
    PrefixLookup(Vec<(Vec<T>, T)>),
    Scaled(Box<WeightRule<T>>, T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leg<T> {
    pub entry: StoppingRule<T>,
    pub exit: StoppingRule<T>,
    pub weight: WeightRule<T>,
}

impl<T: Scalar> Leg<T> {
    pub fn new(entry: StoppingRule<T>, exit: StoppingRule<T>, weight: WeightRule<T>) -> Self {
        Self { entry, exit, weight }
    }

    /// Resolved `(entry, exit)` indices, checking their order.
    fn resolve(&self, path: &[T], grid: &TimeGrid<T>, path_idx: usize, leg_idx: usize) -> Result<(usize, usize)> {
        let a = self.entry.resolve(path, grid)?;
        let b = self.exit.resolve(path, grid)?;
        if a > b {
            return Err(Error::Structure {
                path: path_idx,
                leg: leg_idx,
                detail: format!("entry index {a} after exit index {b}"),
            });
        }
        Ok((a, b))
    }
}

impl<T: Scalar> WeightRule<T> {
    /// Weight on a path, reading only `path[..=entry]`.
    pub fn evaluate(&self, path: &[T], grid: &TimeGrid<T>, entry: usize) -> Result<Option<T>> {
        Ok(match self {
            Self::Constant(c) => Some(*c),
            Self::IndicatorTimes(event, c) => {
                event
                    .evaluate_within(path, grid, entry)?
                    .map(|hit| if hit { *c } else { T::zero() })
            }
            Self::PartialSumBelowZero { prior, scale } => {
                let mut total = T::zero();
                for leg in prior {
                    let (Some(a), Some(b)) = (
                        leg.entry.resolve_within(path, grid, entry)?,
                        leg.exit.resolve_within(path, grid, entry)?,
                    ) else {
                        return Ok(None);
                    };
                    let Some(w) = leg.weight.evaluate(path, grid, a)? else {
                        return Ok(None);
                    };
                    total = total + w * (path[b] - path[a]);
                }
                Some(if total < T::zero() { *scale } else { T::zero() })
            }
            Self::PositivePart { inner, scale } => {
                inner
                    .evaluate(path, grid, entry)?
                    .map(|w| if w > T::zero() { *scale } else { T::zero() })
            }
            Self::PrefixLookup(table) => Some(
                table
                    .iter()
                    .find(|(p, _)| p.as_slice() == &path[..=entry])
                    .map_or(T::zero(), |(_, v)| *v),
            ),
            Self::Scaled(inner, c) => inner.evaluate(path, grid, entry)?.map(|w| w * *c),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleStrategy<T> {
    pub legs: Vec<Leg<T>>,
    pub shortsale_restricted: bool,
}

impl<T: Scalar> SimpleStrategy<T> {
    pub fn new(legs: Vec<Leg<T>>, shortsale_restricted: bool) -> Self {
        Self {
            legs,
            shortsale_restricted,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), false)
    }

    /// `c * 1_{(entry, exit]}`.
    pub fn single(entry: StoppingRule<T>, exit: StoppingRule<T>, c: T) -> Self {
        Self::new(vec![Leg::new(entry, exit, WeightRule::Constant(c))], c >= T::zero())
    }

    /// Every weight multiplied by -1. Drops the shortsale flag.
    pub fn negated(&self) -> Self {
        let legs = self
            .legs
            .iter()
            .map(|l| Leg {
                weight: WeightRule::Scaled(Box::new(l.weight.clone()), -T::one()),
                ..l.clone()
            })
            .collect();
        Self::new(legs, false)
    }

    /// Legs of `self` followed by legs of `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut legs = self.legs.clone();
        legs.extend(other.legs.iter().cloned());
        Self::new(legs, self.shortsale_restricted && other.shortsale_restricted)
    }

    /// Per-leg `(entry, exit, weight)` on one path with all structural checks.
    pub fn resolve_path(&self, path: &[T], grid: &TimeGrid<T>, path_idx: usize) -> Result<Vec<(usize, usize, T)>> {
        let mut out = Vec::with_capacity(self.legs.len());
        let mut last_exit = 0;
        for (j, leg) in self.legs.iter().enumerate() {
            let (a, b) = leg.resolve(path, grid, path_idx, j)?;
            if j > 0 && a < last_exit {
                return Err(Error::Structure {
                    path: path_idx,
                    leg: j,
                    detail: format!("entry index {a} before previous exit {last_exit}"),
                });
            }
            last_exit = b;
            let w = leg.weight.evaluate(path, grid, a)?.ok_or_else(|| Error::Adaptedness {
                path: path_idx,
                leg: j,
                detail: "weight is not determined at the entry time".into(),
            })?;
            out.push((a, b, w));
        }
        Ok(out)
    }

    pub fn check_shortsale(&self, ensemble: &PathEnsemble<T>) -> Result<()> {
        for (i, path) in ensemble.paths().enumerate() {
            for (j, (_, _, w)) in self.resolve_path(path, ensemble.grid(), i)?.into_iter().enumerate() {
                if w < T::zero() {
                    return Err(Error::Constraint {
                        path: i,
                        leg: j,
                        weight: w.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for SimpleStrategy<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.legs.is_empty() {
            return write!(f, "0");
        }
        for (j, leg) in self.legs.iter().enumerate() {
            if j > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{} * ({}, {}]", leg.weight, leg.entry, leg.exit)?;
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for WeightRule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "{c}"),
            Self::IndicatorTimes(e, c) => write!(f, "{c}*1[{e}]"),
            Self::PartialSumBelowZero { prior, scale } => {
                write!(f, "{scale}*1[gain of {} prior legs < 0]", prior.len())
            }
            Self::PositivePart { inner, scale } => write!(f, "{scale}*1[{inner} > 0]"),
            Self::PrefixLookup(t) => write!(f, "table({} nodes)", t.len()),
            Self::Scaled(inner, c) => write!(f, "{c}*({inner})"),
        }
    }
}

/// `(H . X)` per path: `sum_j g_j (X_exit - X_entry)`.
pub fn strategy_gain<T: Scalar>(strategy: &SimpleStrategy<T>, ensemble: &PathEnsemble<T>) -> Result<Vec<T>> {
    let grid = ensemble.grid();
    (0..ensemble.n_paths())
        .into_par_iter()
        .map(|i| {
            let path = ensemble.path(i);
            let legs = strategy.resolve_path(path, grid, i)?;
            Ok(legs
                .into_iter()
                .fold(T::zero(), |acc, (a, b, w)| acc + w * (path[b] - path[a])))
        })
        .collect()
}

/// Membership in the class of a.s. non-negative, not a.s. zero variables.
pub fn is_strictly_positive_class<T: Scalar>(samples: &[T], weights: &[T], tol_zero: T) -> bool {
    let mut positive = false;
    for (&x, &w) in samples.iter().zip(weights) {
        if w <= T::zero() {
            continue;
        }
        if x < -tol_zero {
            return false;
        }
        if x > tol_zero {
            positive = true;
        }
    }
    positive
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Gains in `[-tol_zero, tol_zero]` count as zero.
    pub tol_zero: T,
    /// Positive paths required before declaring an arbitrage.
    pub min_hits: usize,
}

impl<T: Scalar> Tolerances<T> {
    pub fn exact() -> Self {
        Self {
            tol_zero: T::zero(),
            min_hits: 1,
        }
    }

    /// `1e-9 * price_scale` noise margin and `ceil(1e-3 n)` hits.
    pub fn monte_carlo(n_paths: usize, price_scale: T) -> Self {
        let tol = T::from_f64(1e-9).unwrap_or_else(T::zero) * price_scale.abs();
        Self {
            tol_zero: tol,
            min_hits: (n_paths as f64 * 1e-3).ceil().max(1.0) as usize,
        }
    }

    pub fn for_ensemble(ensemble: &PathEnsemble<T>) -> Self {
        if T::EXACT || !ensemble.is_uniform() {
            Self::exact()
        } else {
            let scale = ensemble.path(0)[0].abs().max_of(T::one());
            Self::monte_carlo(ensemble.n_paths(), scale)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArbitrageVerdict {
    Arbitrage,
    NoArbitrageEvidence,
    Inconclusive,
}

impl ArbitrageVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Arbitrage => "ARBITRAGE",
            Self::NoArbitrageEvidence => "NO_ARBITRAGE_EVIDENCE",
            Self::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl fmt::Display for ArbitrageVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageReport<T> {
    pub min_gain: T,
    pub max_gain: T,
    /// Probability mass of paths with gain above `tol_zero`.
    pub frac_positive: f64,
    /// Probability mass of paths with gain below `-tol_zero`.
    pub frac_negative: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    pub verdict: ArbitrageVerdict,
    pub tolerances: Tolerances<T>,
    pub n_paths: usize,
}

/// Summarizes per-path gains into a verdict.
pub fn report_from_gains<T: Scalar>(gains: &[T], ensemble: &PathEnsemble<T>, tol: Tolerances<T>) -> ArbitrageReport<T> {
    let weights = ensemble.weights();
    let mut min_gain = gains[0];
    let mut max_gain = gains[0];
    let mut pos_w = vec![0.0; gains.len()];
    let mut neg_w = vec![0.0; gains.len()];
    let (mut n_pos, mut n_neg) = (0, 0);
    for (i, (&g, &w)) in gains.iter().zip(weights).enumerate() {
        if w <= T::zero() {
            continue;
        }
        min_gain = min_gain.min_of(g);
        max_gain = max_gain.max_of(g);
        if g > tol.tol_zero {
            n_pos += 1;
            pos_w[i] = w.to_f64_lossy();
        } else if g < -tol.tol_zero {
            n_neg += 1;
            neg_w[i] = w.to_f64_lossy();
        }
    }
    let verdict = if min_gain >= -tol.tol_zero && n_pos >= tol.min_hits {
        ArbitrageVerdict::Arbitrage
    } else if n_neg == 0 && n_pos > 0 {
        ArbitrageVerdict::Inconclusive
    } else {
        ArbitrageVerdict::NoArbitrageEvidence
    };
    ArbitrageReport {
        min_gain,
        max_gain,
        frac_positive: crate::stats::pairwise_sum(&pos_w),
        frac_negative: crate::stats::pairwise_sum(&neg_w),
        n_positive: n_pos,
        n_negative: n_neg,
        verdict,
        tolerances: tol,
        n_paths: gains.len(),
    }
}

pub fn arbitrage_verdict<T: Scalar>(
    strategy: &SimpleStrategy<T>,
    ensemble: &PathEnsemble<T>,
    tolerances: Tolerances<T>,
) -> Result<ArbitrageReport<T>> {
    if strategy.shortsale_restricted {
        strategy.check_shortsale(ensemble)?;
    }
    let gains = strategy_gain(strategy, ensemble)?;
    Ok(report_from_gains(&gains, ensemble, tolerances))
}

/// Single-leg candidate `(entry, exit, event)` for the search.
#[derive(Debug, Clone, PartialEq)]
pub struct LegCandidate<T> {
    pub entry: StoppingRule<T>,
    pub exit: StoppingRule<T>,
    pub event: EventPredicate<T>,
}

impl<T: Scalar> LegCandidate<T> {
    pub fn new(entry: StoppingRule<T>, exit: StoppingRule<T>, event: EventPredicate<T>) -> Self {
        Self { entry, exit, event }
    }

    pub fn strategy(&self, sign: T) -> SimpleStrategy<T> {
        let weight = WeightRule::IndicatorTimes(self.event.clone(), sign);
        SimpleStrategy::new(
            vec![Leg::new(self.entry.clone(), self.exit.clone(), weight)],
            sign >= T::zero(),
        )
    }

    pub fn map_levels(&self, level: &dyn Fn(T) -> Result<T>, eps: &dyn Fn(T) -> Result<T>) -> Result<Self> {
        Ok(Self {
            entry: self.entry.map_levels(level, eps)?,
            exit: self.exit.map_levels(level, eps)?,
            event: self.event.map_levels(level, eps)?,
        })
    }
}

impl<T: Scalar> fmt::Display for LegCandidate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "entry: {}; exit: {}; event: {}", self.entry, self.exit, self.event)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult<T> {
    pub index: usize,
    pub sign: T,
    pub report: ArbitrageReport<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<T> {
    pub best: CandidateResult<T>,
    pub strategy: SimpleStrategy<T>,
    pub evaluated: Vec<CandidateResult<T>>,
}

impl<T> SearchOutcome<T> {
    pub fn verdict(&self) -> ArbitrageVerdict {
        self.best.report.verdict
    }
}

/// Tries every candidate long (and short, unless restricted) and returns the
/// one with the largest minimum gain among those with some positive gain.
pub fn search_single_leg<T: Scalar>(
    ensemble: &PathEnsemble<T>,
    family: &[LegCandidate<T>],
    shortsale_restricted: bool,
    tolerances: Tolerances<T>,
) -> Result<SearchOutcome<T>> {
    if family.is_empty() {
        return Err(Error::Argument("empty candidate family".into()));
    }
    let signs: Vec<T> = if shortsale_restricted {
        vec![T::one()]
    } else {
        vec![T::one(), -T::one()]
    };
    let mut evaluated = Vec::with_capacity(family.len() * signs.len());
    for (index, cand) in family.iter().enumerate() {
        for &sign in &signs {
            let report = arbitrage_verdict(&cand.strategy(sign), ensemble, tolerances)?;
            evaluated.push(CandidateResult { index, sign, report });
        }
    }
    let rank = |r: &CandidateResult<T>| {
        (
            r.report.verdict == ArbitrageVerdict::Arbitrage,
            r.report.frac_positive > 0.0,
        )
    };
    let best = evaluated
        .iter()
        .reduce(|best, r| {
            let (kb, kr) = (rank(best), rank(r));
            if kr > kb || (kr == kb && r.report.min_gain > best.report.min_gain) {
                r
            } else {
                best
            }
        })
        .expect("non-empty family")
        .clone();
    let strategy = family[best.index].strategy(best.sign);
    Ok(SearchOutcome {
        best,
        strategy,
        evaluated,
    })
}

/// Grid of candidates on `[0, horizon]` around the starting level `x0`:
/// deterministic and hitting-time entries, deterministic exits, and events
/// comparing the entry value with `x0`. Every entry is capped strictly before
/// its exit. At time 0 the value is `x0` on every path, so only the whole
/// space is used there.
pub fn standard_leg_family<T: Scalar>(horizon: T, x0: T) -> Vec<LegCandidate<T>> {
    let frac = |n: i64, d: i64| T::from_i64(n).unwrap() / T::from_i64(d).unwrap();
    let scale = x0.abs().max_of(frac(1, 10));
    let quarter = horizon * frac(1, 4);
    let half = horizon * frac(1, 2);
    let mut entries = vec![
        StoppingRule::deterministic(T::zero()),
        StoppingRule::deterministic(horizon * frac(1, 8)),
        StoppingRule::deterministic(quarter),
        StoppingRule::deterministic(half),
    ];
    for k in [1, 2, 3] {
        let up = x0 + scale * frac(k, 10);
        let down = x0 - scale * frac(k, 10);
        entries.push(StoppingRule::hit_above(up, half));
        entries.push(StoppingRule::hit_below(down, half));
    }
    let exits = [horizon * frac(3, 4), horizon];
    let mut out = Vec::new();
    for entry in &entries {
        for &exit in &exits {
            if entry.cap >= exit {
                continue;
            }
            let events = if entry.cap == T::zero() {
                vec![EventPredicate::WholeSpace]
            } else {
                vec![
                    EventPredicate::WholeSpace,
                    EventPredicate::value_below_at(entry.clone(), x0),
                    EventPredicate::value_above_at(entry.clone(), x0),
                ]
            };
            for event in events {
                out.push(LegCandidate::new(
                    entry.clone(),
                    StoppingRule::deterministic(exit),
                    event,
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use proptest::prelude::*;

    type R = StoppingRule<f64>;

    fn ensemble(paths: &[Vec<f64>]) -> PathEnsemble<f64> {
        let g = TimeGrid::integers(paths[0].len() - 1).unwrap();
        PathEnsemble::from_paths(g, paths, None).unwrap()
    }

    #[test]
    fn empty_strategy_has_zero_gain() {
        let e = ensemble(&[vec![1.0, 2.0], vec![1.0, 0.0]]);
        assert_eq!(strategy_gain(&SimpleStrategy::empty(), &e).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn long_leg_on_constant_paths_gains_nothing() {
        let e = ensemble(&[vec![2.0; 3], vec![5.0; 3]]);
        let s = SimpleStrategy::single(R::deterministic(0.0), R::deterministic(1.0), 1.0);
        assert_eq!(strategy_gain(&s, &e).unwrap(), vec![0.0, 0.0]);
        let rep = arbitrage_verdict(&s, &e, Tolerances::exact()).unwrap();
        assert_eq!(rep.min_gain, 0.0);
        assert_eq!(rep.frac_positive, 0.0);
        assert_eq!(rep.verdict, ArbitrageVerdict::NoArbitrageEvidence);
    }

    #[test]
    fn strictly_positive_class_examples() {
        let w = [1.0 / 3.0; 3];
        assert!(is_strictly_positive_class(&[1.0, 0.0, 2.0], &w, 1e-12));
        assert!(!is_strictly_positive_class(&[0.0, 0.0, 0.0], &w, 1e-12));
        assert!(!is_strictly_positive_class(&[1.0, -0.1, 2.0], &w, 1e-12));
        // zero-weight paths are ignored
        assert!(is_strictly_positive_class(&[1.0, -5.0], &[1.0, 0.0], 0.0));
    }

    #[test]
    fn overlapping_legs_are_reported_with_path_index() {
        let e = ensemble(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]);
        let leg = |a: f64, b: f64| Leg::new(R::deterministic(a), R::deterministic(b), WeightRule::Constant(1.0));
        let s = SimpleStrategy::new(vec![leg(0.0, 2.0), leg(1.0, 2.0)], true);
        match strategy_gain(&s, &e) {
            Err(Error::Structure { path: 0, leg: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let backwards = SimpleStrategy::new(vec![leg(2.0, 1.0)], true);
        assert!(matches!(strategy_gain(&backwards, &e), Err(Error::Structure { .. })));
    }

    #[test]
    fn shortsale_restriction_rejects_negative_weights() {
        let e = ensemble(&[vec![1.0, 0.0]]);
        let mut s = SimpleStrategy::single(R::deterministic(0.0), R::deterministic(1.0), -1.0);
        s.shortsale_restricted = true;
        assert!(matches!(
            arbitrage_verdict(&s, &e, Tolerances::exact()),
            Err(Error::Constraint { .. })
        ));
        s.shortsale_restricted = false;
        let rep = arbitrage_verdict(&s, &e, Tolerances::exact()).unwrap();
        assert_eq!(rep.verdict, ArbitrageVerdict::Arbitrage);
    }

    #[test]
    fn weights_must_be_known_at_entry() {
        let e = ensemble(&[vec![1.0, 2.0, 3.0]]);
        let peek = EventPredicate::value_above_at(R::deterministic(2.0), 0.0);
        let leg = Leg::new(
            R::deterministic(0.0),
            R::deterministic(1.0),
            WeightRule::IndicatorTimes(peek, 1.0),
        );
        let s = SimpleStrategy::new(vec![leg], true);
        assert!(matches!(strategy_gain(&s, &e), Err(Error::Adaptedness { .. })));
    }

    #[test]
    fn monotone_single_path_is_an_arbitrage() {
        let e = ensemble(&[vec![1.0, 2.0, 3.0]]);
        let fam = vec![LegCandidate::new(
            R::deterministic(0.0),
            R::deterministic(2.0),
            EventPredicate::WholeSpace,
        )];
        let out = search_single_leg(&e, &fam, true, Tolerances::exact()).unwrap();
        assert_eq!(out.verdict(), ArbitrageVerdict::Arbitrage);
        assert_eq!(out.best.sign, 1.0);
    }

    #[test]
    fn empty_family_is_an_argument_error() {
        let e = ensemble(&[vec![1.0, 2.0]]);
        assert!(matches!(
            search_single_leg(&e, &[], true, Tolerances::exact()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn inconclusive_when_too_few_hits() {
        let mut paths = vec![vec![1.0, 1.0]; 99];
        paths.push(vec![1.0, 2.0]);
        let e = ensemble(&paths);
        let s = SimpleStrategy::single(R::deterministic(0.0), R::deterministic(1.0), 1.0);
        let tol = Tolerances {
            tol_zero: 0.0,
            min_hits: 5,
        };
        assert_eq!(
            arbitrage_verdict(&s, &e, tol).unwrap().verdict,
            ArbitrageVerdict::Inconclusive
        );
    }

    #[test]
    fn standard_family_is_large_and_well_ordered() {
        let fam = standard_leg_family(1.0, 1.0);
        assert!(fam.len() >= 50);
        assert!(fam.iter().all(|c| c.entry.cap < c.exit.cap));
    }

    fn exact_ensemble(raw: &[Vec<i64>]) -> PathEnsemble<Rational64> {
        let g = TimeGrid::integers(raw[0].len() - 1).unwrap();
        let paths: Vec<Vec<Rational64>> = raw
            .iter()
            .map(|p| p.iter().map(|&v| Rational64::from_integer(v)).collect())
            .collect();
        PathEnsemble::from_paths(g, &paths, None).unwrap()
    }

    proptest! {
        #[test]
        fn gains_are_linear_and_flip_sign(
            raw in proptest::collection::vec(proptest::collection::vec(-5i64..5, 5), 1..6),
            split in 1usize..4,
            c1 in -3i64..3,
            c2 in -3i64..3,
        ) {
            let e = exact_ensemble(&raw);
            let r = |t: usize| StoppingRule::deterministic(Rational64::from_integer(t as i64));
            let level = Rational64::from_integer(0);
            let a = SimpleStrategy::new(vec![Leg::new(
                StoppingRule::hit_above(level, Rational64::from_integer(split as i64 - 1)),
                r(split),
                WeightRule::Constant(Rational64::from_integer(c1)),
            )], false);
            let b = SimpleStrategy::new(vec![Leg::new(
                r(split),
                r(4),
                WeightRule::IndicatorTimes(
                    EventPredicate::value_below_at(r(split), level),
                    Rational64::from_integer(c2),
                ),
            )], false);
            let ga = strategy_gain(&a, &e).unwrap();
            let gb = strategy_gain(&b, &e).unwrap();
            let gab = strategy_gain(&a.concat(&b), &e).unwrap();
            for i in 0..ga.len() {
                prop_assert_eq!(gab[i], ga[i] + gb[i]);
            }
            let neg = strategy_gain(&a.concat(&b).negated(), &e).unwrap();
            for i in 0..ga.len() {
                prop_assert_eq!(neg[i], -gab[i]);
            }
            // exact verdicts coincide with class membership
            let rep = arbitrage_verdict(&a.concat(&b), &e, Tolerances::exact()).unwrap();
            prop_assert_eq!(
                rep.verdict == ArbitrageVerdict::Arbitrage,
                is_strictly_positive_class(&gab, e.weights(), Rational64::from_integer(0))
            );
        }

        #[test]
        fn restricted_arbitrage_survives_dropping_the_restriction(
            raw in proptest::collection::vec(proptest::collection::vec(-3i64..3, 3), 1..5),
        ) {
            let e = exact_ensemble(&raw);
            let r = |t: i64| StoppingRule::deterministic(Rational64::from_integer(t));
            let mut s = SimpleStrategy::single(r(0), r(2), Rational64::from_integer(1));
            s.shortsale_restricted = true;
            let restricted = arbitrage_verdict(&s, &e, Tolerances::exact()).unwrap();
            s.shortsale_restricted = false;
            let free = arbitrage_verdict(&s, &e, Tolerances::exact()).unwrap();
            if restricted.verdict == ArbitrageVerdict::Arbitrage {
                prop_assert_eq!(free.verdict, ArbitrageVerdict::Arbitrage);
            }
        }
    }
}
