//! Algorithms that turn one no-arbitrage ingredient into another.
//!
//! * [`extract_from_violation`]: a probe on which the path never stays within
//!   `eps` of `X_tau` on an event `A` becomes the short position
//!   `-1_A 1_{(tau^A, theta^A]}`, where `theta` is the first drop of `eps/2`.
//! * [`find_violation_witness`]: a short leg that never loses is turned back
//!   into such a probe by watching for a rise above `K + 1` before the exit.
//! * [`reduce_to_single_leg`]: a multi-leg long-only arbitrage on an exact
//!   ensemble is cut down to a single indicator leg `1_C 1_{(tau_k, tau_k+1]}`.

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::star::{star_probe, StarConfig};
use crate::stopping::{EventPredicate, StoppingRule};
use crate::strategy::{
    arbitrage_verdict, is_strictly_positive_class, report_from_gains, strategy_gain, ArbitrageReport, ArbitrageVerdict,
    Leg, SimpleStrategy, Tolerances, WeightRule,
};

/// Probe parameters on which the stay-above probability is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationWitness<T> {
    pub tau: StoppingRule<T>,
    pub event: EventPredicate<T>,
    pub horizon: T,
    pub epsilon: T,
}

impl<T: Scalar> ViolationWitness<T> {
    /// `(p_hat, p_a)` of the witness probe on `ensemble`.
    pub fn probabilities(&self, ensemble: &PathEnsemble<T>) -> Result<(f64, f64)> {
        let probe = crate::star::StarProbe::new(self.tau.clone(), self.event.clone(), self.horizon, vec![self.epsilon]);
        let report = star_probe(ensemble, &probe, StarConfig { min_count: 1 })?;
        let e = &report.entries[0];
        Ok((e.p_hat, e.p_a))
    }

    pub fn holds_on(&self, ensemble: &PathEnsemble<T>) -> Result<bool> {
        let (p_hat, p_a) = self.probabilities(ensemble)?;
        Ok(p_hat == 0.0 && p_a > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction<T> {
    pub strategy: SimpleStrategy<T>,
    pub report: ArbitrageReport<T>,
    pub gains: Vec<T>,
    /// Largest single-step move on the ensemble; bounds how far a grid-based
    /// first-drop time can overshoot the continuous one.
    pub grid_slack: T,
}

/// Largest absolute one-step increment over all paths.
pub fn max_step<T: Scalar>(ensemble: &PathEnsemble<T>) -> T {
    ensemble
        .paths()
        .flat_map(|p| p.windows(2).map(|w| (w[1] - w[0]).abs()))
        .fold(T::zero(), T::max_of)
}

pub fn extract_from_violation<T: Scalar>(
    ensemble: &PathEnsemble<T>,
    witness: &ViolationWitness<T>,
    tolerances: Tolerances<T>,
) -> Result<Extraction<T>> {
    let (p_hat, p_a) = witness.probabilities(ensemble)?;
    if p_a == 0.0 {
        return Err(Error::Refused("witness event has no mass on this ensemble".into()));
    }
    if p_hat > 0.0 {
        return Err(Error::Refused(format!(
            "witness does not violate on this ensemble (p_hat = {p_hat})"
        )));
    }
    let two = T::one() + T::one();
    let t = witness.horizon;
    let entry = StoppingRule::restricted(witness.tau.clone(), witness.event.clone(), t);
    let theta = StoppingRule::first_drop(entry.clone(), witness.epsilon / two, t);
    let exit = StoppingRule::restricted(theta, witness.event.clone(), t);
    let weight = WeightRule::IndicatorTimes(witness.event.clone(), -T::one());
    let strategy = SimpleStrategy::new(vec![Leg::new(entry, exit, weight)], false);
    let gains = strategy_gain(&strategy, ensemble)?;
    let report = report_from_gains(&gains, ensemble, tolerances);
    Ok(Extraction {
        strategy,
        report,
        gains,
        grid_slack: max_step(ensemble),
    })
}

/// Searches `levels` for a `K` such that paths starting the short leg below
/// `K` and later rising above `K + 1` before the exit carry positive mass.
/// Returns the resulting witness with `eps = 1/2`, or `None`.
pub fn find_violation_witness<T: Scalar>(
    ensemble: &PathEnsemble<T>,
    tau0: &StoppingRule<T>,
    tau1: &StoppingRule<T>,
    levels: &[T],
    horizon: T,
    tolerances: Tolerances<T>,
) -> Result<Option<ViolationWitness<T>>> {
    if horizon < tau1.cap {
        return Err(Error::Argument(format!(
            "horizon {horizon} is before the exit cap {}",
            tau1.cap
        )));
    }
    let short = SimpleStrategy::single(tau0.clone(), tau1.clone(), -T::one());
    let report = arbitrage_verdict(&short, ensemble, tolerances)?;
    if report.verdict != ArbitrageVerdict::Arbitrage {
        return Err(Error::Refused(format!(
            "short leg is not an arbitrage on this ensemble ({})",
            report.verdict
        )));
    }
    let grid = ensemble.grid();
    let half = T::one() / (T::one() + T::one());
    for &k in levels {
        let a = EventPredicate::value_below_at(tau0.clone(), k)
            .and(EventPredicate::strictly_later(tau1.clone(), tau0.clone()));
        let tau0_a = StoppingRule::restricted(tau0.clone(), a.clone(), horizon);
        let tau1_a = StoppingRule::restricted(tau1.clone(), a.clone(), horizon);
        let rise = StoppingRule::first_above(tau0_a, k + T::one(), horizon);
        let tau = StoppingRule::earliest(rise, tau1_a.clone());
        let b = a.and(EventPredicate::strictly_later(tau1_a, tau.clone()));
        let mut mass = T::zero();
        for (path, &w) in ensemble.paths().zip(ensemble.weights()) {
            if b.evaluate(path, grid)? {
                mass = mass + w;
            }
        }
        if mass > T::zero() {
            return Ok(Some(ViolationWitness {
                tau,
                event: b,
                horizon,
                epsilon: half,
            }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionCase {
    /// Earlier legs sum to zero on every path: `C = {g_k > 0}`.
    WeightPositive,
    /// Earlier legs lose on some path: `C = {sum_{j<k} g_j dX_j < 0}`.
    PriorLoss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction<T> {
    pub strategy: SimpleStrategy<T>,
    pub report: ArbitrageReport<T>,
    pub gains: Vec<T>,
    /// 1-based index of the selected leg among the non-trivial legs.
    pub k: usize,
    pub case: ReductionCase,
    /// Legs left after removing those with zero weight on every path.
    pub kept_legs: Vec<Leg<T>>,
}

/// Smallest 1-based `l` such that leg `l` has positive weight somewhere and
/// the partial gain through leg `l` is non-negative everywhere and positive
/// somewhere.
pub fn minimal_index<T: Scalar>(weights: &[Vec<T>], increments: &[Vec<T>], probs: &[T]) -> Option<usize> {
    let n_legs = weights.first().map_or(0, Vec::len);
    let mut partial = vec![T::zero(); weights.len()];
    for l in 0..n_legs {
        for (i, s) in partial.iter_mut().enumerate() {
            *s = *s + weights[i][l] * increments[i][l];
        }
        let live = |i: usize| probs[i] > T::zero();
        let some_weight = (0..weights.len()).any(|i| live(i) && weights[i][l] > T::zero());
        let nonneg = (0..weights.len()).all(|i| !live(i) || partial[i] >= T::zero());
        let positive = (0..weights.len()).any(|i| live(i) && partial[i] > T::zero());
        if some_weight && nonneg && positive {
            return Some(l + 1);
        }
    }
    None
}

pub fn reduce_to_single_leg<T: Scalar>(
    ensemble: &PathEnsemble<T>,
    strategy: &SimpleStrategy<T>,
) -> Result<Reduction<T>> {
    if !T::EXACT {
        return Err(Error::Argument("reduction needs an exact scalar type".into()));
    }
    if !strategy.shortsale_restricted {
        return Err(Error::Argument(
            "reduction applies to shortsale-restricted strategies".into(),
        ));
    }
    let input = arbitrage_verdict(strategy, ensemble, Tolerances::exact())?;
    if input.verdict != ArbitrageVerdict::Arbitrage {
        return Err(Error::Refused(format!(
            "input is not an exact arbitrage ({})",
            input.verdict
        )));
    }
    let grid = ensemble.grid();
    let probs = ensemble.weights();
    let resolved: Vec<Vec<(usize, usize, T)>> = ensemble
        .paths()
        .enumerate()
        .map(|(i, p)| strategy.resolve_path(p, grid, i))
        .collect::<Result<_>>()?;
    let keep: Vec<usize> = (0..strategy.legs.len())
        .filter(|&j| {
            resolved
                .iter()
                .zip(probs)
                .any(|(r, &w)| w > T::zero() && r[j].2 != T::zero())
        })
        .collect();
    let kept_legs: Vec<Leg<T>> = keep.iter().map(|&j| strategy.legs[j].clone()).collect();
    let weights: Vec<Vec<T>> = resolved
        .iter()
        .map(|r| keep.iter().map(|&j| r[j].2).collect())
        .collect();
    let increments: Vec<Vec<T>> = ensemble
        .paths()
        .zip(&resolved)
        .map(|(p, r)| keep.iter().map(|&j| p[r[j].1] - p[r[j].0]).collect())
        .collect();
    let k = minimal_index(&weights, &increments, probs)
        .ok_or_else(|| Error::Internal("no leg satisfies the minimality conditions".into()))?;
    let prior_zero = (0..weights.len()).all(|i| {
        probs[i] == T::zero() || (0..k - 1).fold(T::zero(), |s, l| s + weights[i][l] * increments[i][l]) == T::zero()
    });
    let leg = &kept_legs[k - 1];
    let (case, weight) = if prior_zero {
        let indicator_already = weights.iter().all(|w| w[k - 1] == T::zero() || w[k - 1] == T::one());
        let weight = if indicator_already {
            leg.weight.clone()
        } else {
            WeightRule::PositivePart {
                inner: Box::new(leg.weight.clone()),
                scale: T::one(),
            }
        };
        (ReductionCase::WeightPositive, weight)
    } else {
        let weight = WeightRule::PartialSumBelowZero {
            prior: kept_legs[..k - 1].to_vec(),
            scale: T::one(),
        };
        (ReductionCase::PriorLoss, weight)
    };
    let reduced = SimpleStrategy::new(vec![Leg::new(leg.entry.clone(), leg.exit.clone(), weight)], true);
    let gains = strategy_gain(&reduced, ensemble)?;
    if !is_strictly_positive_class(&gains, probs, T::zero()) {
        return Err(Error::Internal("reduced strategy is not an arbitrage".into()));
    }
    let report = report_from_gains(&gains, ensemble, Tolerances::exact());
    Ok(Reduction {
        strategy: reduced,
        report,
        gains,
        k,
        case,
        kept_legs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use num_rational::Rational64;

    type Q = Rational64;

    fn q(v: i64) -> Q {
        Q::from_integer(v)
    }

    fn exact(raw: &[Vec<i64>]) -> PathEnsemble<Q> {
        let g = TimeGrid::integers(raw[0].len() - 1).unwrap();
        let paths: Vec<Vec<Q>> = raw.iter().map(|p| p.iter().map(|&v| q(v)).collect()).collect();
        PathEnsemble::from_paths(g, &paths, None).unwrap()
    }

    fn at(t: i64) -> StoppingRule<Q> {
        StoppingRule::deterministic(q(t))
    }

    #[test]
    fn reduction_through_a_prior_loss() {
        // paths A:(1,2,2), B:(1,0,1), C:(1,1,1)
        let e = exact(&[vec![1, 2, 2], vec![1, 0, 1], vec![1, 1, 1]]);
        let second = WeightRule::IndicatorTimes(EventPredicate::prefix_in(at(1), vec![vec![q(1), q(0)]]), q(2));
        let s = SimpleStrategy::new(
            vec![
                Leg::new(at(0), at(1), WeightRule::Constant(q(1))),
                Leg::new(at(1), at(2), second),
            ],
            true,
        );
        assert_eq!(strategy_gain(&s, &e).unwrap(), vec![q(1), q(1), q(0)]);
        let r = reduce_to_single_leg(&e, &s).unwrap();
        assert_eq!(r.k, 2);
        assert_eq!(r.case, ReductionCase::PriorLoss);
        assert_eq!(r.gains, vec![q(0), q(1), q(0)]);
        assert_eq!(r.strategy.legs.len(), 1);
    }

    #[test]
    fn reduction_at_the_first_leg() {
        let e = exact(&[vec![1, 2, 3], vec![1, 1, 1], vec![1, 1, 2]]);
        let second = WeightRule::IndicatorTimes(EventPredicate::value_below_at(at(1), Q::new(3, 2)), q(1));
        let s = SimpleStrategy::new(
            vec![
                Leg::new(at(0), at(1), WeightRule::Constant(q(1))),
                Leg::new(at(1), at(2), second),
            ],
            true,
        );
        assert_eq!(strategy_gain(&s, &e).unwrap(), vec![q(1), q(0), q(1)]);
        let r = reduce_to_single_leg(&e, &s).unwrap();
        assert_eq!(r.k, 1);
        assert_eq!(r.case, ReductionCase::WeightPositive);
        assert_eq!(r.gains, vec![q(1), q(0), q(0)]);
    }

    #[test]
    fn single_indicator_leg_is_returned_unchanged() {
        let e = exact(&[vec![1, 2], vec![1, 1]]);
        let s = SimpleStrategy::single(at(0), at(1), q(1));
        let r = reduce_to_single_leg(&e, &s).unwrap();
        assert_eq!(r.strategy, s);
        assert_eq!(r.k, 1);
    }

    #[test]
    fn reduction_refuses_non_arbitrage_and_unrestricted_input() {
        let e = exact(&[vec![1, 2], vec![1, 0]]);
        let s = SimpleStrategy::single(at(0), at(1), q(1));
        assert!(matches!(reduce_to_single_leg(&e, &s), Err(Error::Refused(_))));
        let short = SimpleStrategy::single(at(0), at(1), q(-1));
        assert!(matches!(reduce_to_single_leg(&e, &short), Err(Error::Argument(_))));
    }

    #[test]
    fn extraction_on_a_sure_drop() {
        // every path falls by exactly 1 at some step
        let e = exact(&[vec![3, 3, 2, 2], vec![3, 2, 2, 5], vec![3, 4, 4, 3]]);
        let w = ViolationWitness {
            tau: at(0),
            event: EventPredicate::value_below_at(at(0), q(10)),
            horizon: q(3),
            epsilon: q(1),
        };
        // the third path drops from 4 to 3 but never below 3 - 1
        assert!(!w.holds_on(&e).unwrap());
        let e = exact(&[vec![3, 3, 2, 2], vec![3, 2, 2, 5], vec![3, 4, 4, 2]]);
        assert!(w.holds_on(&e).unwrap());
        let out = extract_from_violation(&e, &w, Tolerances::exact()).unwrap();
        assert!(out.gains.iter().all(|&g| g >= Q::new(1, 2)));
        assert_eq!(out.report.verdict, ArbitrageVerdict::Arbitrage);
    }

    #[test]
    fn extraction_is_zero_off_the_event() {
        let e = exact(&[vec![3, 1, 1], vec![5, 6, 7]]);
        let w = ViolationWitness {
            tau: at(0),
            event: EventPredicate::value_below_at(at(0), q(4)),
            horizon: q(2),
            epsilon: q(1),
        };
        let out = extract_from_violation(&e, &w, Tolerances::exact()).unwrap();
        assert_eq!(out.gains, vec![q(2), q(0)]);
        assert_eq!(out.grid_slack, q(2));
    }

    #[test]
    fn extraction_refuses_empty_events_and_non_violations() {
        let e = exact(&[vec![3, 1], vec![3, 4]]);
        let empty = ViolationWitness {
            tau: at(0),
            event: EventPredicate::empty(),
            horizon: q(1),
            epsilon: q(1),
        };
        assert!(matches!(
            extract_from_violation(&e, &empty, Tolerances::exact()),
            Err(Error::Refused(_))
        ));
        let all = ViolationWitness {
            event: EventPredicate::WholeSpace,
            ..empty
        };
        assert!(matches!(
            extract_from_violation(&e, &all, Tolerances::exact()),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn witness_from_a_rise_then_fall() {
        // start at 1, rise above K + 1 = 3, end at or below the start
        let e = exact(&[vec![1, 4, 0], vec![1, 1, 1], vec![1, 0, 0]]);
        let w = find_violation_witness(&e, &at(0), &at(2), &[q(2)], q(2), Tolerances::exact())
            .unwrap()
            .expect("witness");
        assert!(w.holds_on(&e).unwrap());
        let out = extract_from_violation(&e, &w, Tolerances::exact()).unwrap();
        assert_eq!(out.report.verdict, ArbitrageVerdict::Arbitrage);
    }

    #[test]
    fn no_witness_when_paths_stay_low() {
        let e = exact(&[vec![1, 1, 0], vec![1, 1, 1]]);
        let w = find_violation_witness(&e, &at(0), &at(2), &[q(2), q(5)], q(2), Tolerances::exact()).unwrap();
        assert!(w.is_none());
    }

    #[test]
    fn witness_search_refuses_non_arbitrage_legs() {
        let e = exact(&[vec![1, 1], vec![2, 2]]);
        let r = find_violation_witness(&e, &at(0), &at(1), &[q(2)], q(1), Tolerances::exact());
        assert!(matches!(r, Err(Error::Refused(_))));
    }

    #[test]
    fn minimal_index_scans_partial_sums() {
        let w = vec![vec![q(1), q(2)], vec![q(1), q(0)]];
        let dx = vec![vec![q(-1), q(1)], vec![q(1), q(0)]];
        assert_eq!(minimal_index(&w, &dx, &[Q::new(1, 2), Q::new(1, 2)]), Some(2));
        assert_eq!(minimal_index(&w, &dx, &[q(0), q(1)]), Some(1));
    }
}
