//! Monte Carlo falsification of the "stays above `X_tau - eps`" property.
//!
//! For a probe `(tau, A, T, eps)` the tester estimates
//! `P(A and inf_{t in [tau, T]} (X_t - X_tau) > -eps)` from the grid values.
//! A zero estimate on a well-populated event is reported as a suspected
//! violation. The test is one-sided: a finite family of probes can never
//! certify the property over all bounded stopping times.

use std::fmt;

use rayon::prelude::*;

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{pairwise_sum, wilson_interval, Z95};
use crate::stopping::{EventPredicate, StoppingRule};

/// Note attached to every report.
pub const ONE_SIDED_NOTE: &str =
    "one-sided test: a finite probe family can suspect a violation but never certify the property";

#[derive(Debug, Clone, PartialEq)]
pub struct StarProbe<T> {
    pub tau: StoppingRule<T>,
    pub event: EventPredicate<T>,
    pub horizon: T,
    pub epsilons: Vec<T>,
}

impl<T: Scalar> StarProbe<T> {
    pub fn new(tau: StoppingRule<T>, event: EventPredicate<T>, horizon: T, epsilons: Vec<T>) -> Self {
        Self {
            tau,
            event,
            horizon,
            epsilons,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < self.tau.cap {
            return Err(Error::Argument(format!(
                "probe horizon {} is before the stopping-time cap {}",
                self.horizon, self.tau.cap
            )));
        }
        if self.epsilons.is_empty() {
            return Err(Error::Argument("probe has no epsilons".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| **e <= T::zero()) {
            return Err(Error::Argument(format!("epsilon must be positive, got {e}")));
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for StarProbe<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tau: {}; event: {}; horizon: {}; eps: ",
            self.tau, self.event, self.horizon
        )?;
        for (i, e) in self.epsilons.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarVerdict {
    Consistent,
    ViolationSuspected,
    Underpowered,
}

impl StarVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Consistent => "CONSISTENT",
            Self::ViolationSuspected => "VIOLATION_SUSPECTED",
            Self::Underpowered => "UNDERPOWERED",
        }
    }
}

impl fmt::Display for StarVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarConfig {
    /// Paths needed in `A` before a zero count is called a violation.
    pub min_count: usize,
}

impl Default for StarConfig {
    fn default() -> Self {
        Self { min_count: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarEntry {
    pub epsilon: f64,
    /// Estimate of the joint probability.
    pub p_hat: f64,
    pub p_a: f64,
    pub n_a: usize,
    pub n_joint: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub verdict: StarVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarReport {
    pub entries: Vec<StarEntry>,
    pub n_paths: usize,
    pub note: &'static str,
}

impl StarReport {
    pub fn verdict(&self) -> StarVerdict {
        overall(self.entries.iter().map(|e| e.verdict))
    }
}

fn overall(verdicts: impl Iterator<Item = StarVerdict>) -> StarVerdict {
    let mut out = StarVerdict::Consistent;
    for v in verdicts {
        if v == StarVerdict::ViolationSuspected {
            return v;
        }
        if v == StarVerdict::Underpowered {
            out = v;
        }
    }
    out
}

/// Per-path `(in A, running minimum of X_t - X_tau on [tau, T])`.
fn path_statistics<T: Scalar>(ensemble: &PathEnsemble<T>, probe: &StarProbe<T>) -> Result<Vec<(bool, T)>> {
    let grid = ensemble.grid();
    let end = grid.index_at_or_before(probe.horizon)?;
    (0..ensemble.n_paths())
        .into_par_iter()
        .map(|i| {
            let path = ensemble.path(i);
            let tau = probe.tau.resolve(path, grid)?;
            let in_a = probe
                .event
                .evaluate_within(path, grid, tau)?
                .ok_or_else(|| Error::Argument(format!("event {} is not decided at tau on path {i}", probe.event)))?;
            let base = path[tau];
            let run_min = path[tau..=end.max(tau)]
                .iter()
                .fold(T::zero(), |m, &x| m.min_of(x - base));
            Ok((in_a, run_min))
        })
        .collect()
}

pub fn star_probe<T: Scalar>(
    ensemble: &PathEnsemble<T>,
    probe: &StarProbe<T>,
    config: StarConfig,
) -> Result<StarReport> {
    probe.validate()?;
    if probe.horizon > ensemble.grid().horizon() + T::grid_tolerance() {
        return Err(Error::Domain(format!(
            "probe horizon {} beyond grid horizon {}",
            probe.horizon,
            ensemble.grid().horizon()
        )));
    }
    let stats = path_statistics(ensemble, probe)?;
    let weights = ensemble.weights_f64();
    let a_w: Vec<f64> = stats
        .iter()
        .zip(&weights)
        .map(|(&(a, _), &w)| if a { w } else { 0.0 })
        .collect();
    let n_a = stats.iter().zip(&weights).filter(|(s, &w)| s.0 && w > 0.0).count();
    let total = pairwise_sum(&weights);
    let p_a = pairwise_sum(&a_w) / total;
    let n_eff = effective_n(&weights);
    let entries = probe
        .epsilons
        .iter()
        .map(|&eps| {
            let joint: Vec<f64> = stats
                .iter()
                .zip(&a_w)
                .map(|(&(_, m), &w)| if m > -eps { w } else { 0.0 })
                .collect();
            let n_joint = joint.iter().filter(|&&w| w > 0.0).count();
            let p_hat = pairwise_sum(&joint) / total;
            let (ci_low, ci_high) = wilson_interval(p_hat, n_eff, Z95);
            let verdict = if n_joint > 0 {
                StarVerdict::Consistent
            } else if n_a >= config.min_count && p_a > 0.0 {
                StarVerdict::ViolationSuspected
            } else {
                StarVerdict::Underpowered
            };
            StarEntry {
                epsilon: eps.to_f64_lossy(),
                p_hat,
                p_a,
                n_a,
                n_joint,
                ci_low,
                ci_high,
                verdict,
            }
        })
        .collect();
    Ok(StarReport {
        entries,
        n_paths: ensemble.n_paths(),
        note: ONE_SIDED_NOTE,
    })
}

fn effective_n(weights: &[f64]) -> f64 {
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let total = pairwise_sum(weights);
    total * total / pairwise_sum(&sq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub reports: Vec<StarReport>,
    pub verdict: StarVerdict,
    pub note: &'static str,
}

/// Runs every probe. The overall verdict is a violation if any probe flags
/// one and consistent otherwise.
pub fn star_scan<T: Scalar>(
    ensemble: &PathEnsemble<T>,
    probes: &[StarProbe<T>],
    config: StarConfig,
) -> Result<ScanReport> {
    if probes.is_empty() {
        return Err(Error::Argument("empty probe list".into()));
    }
    let reports = probes
        .iter()
        .map(|p| star_probe(ensemble, p, config))
        .collect::<Result<Vec<_>>>()?;
    let suspected = reports.iter().any(|r| r.verdict() == StarVerdict::ViolationSuspected);
    let verdict = if suspected {
        StarVerdict::ViolationSuspected
    } else {
        StarVerdict::Consistent
    };
    Ok(ScanReport {
        reports,
        verdict,
        note: ONE_SIDED_NOTE,
    })
}

/// Probes on `[0, horizon]` around `x0`: deterministic and hitting-time
/// anchors, whole-space and level events, a spread of epsilons.
pub fn standard_probe_family<T: Scalar>(horizon: T, x0: T) -> Vec<StarProbe<T>> {
    let frac = |n: i64, d: i64| T::from_i64(n).unwrap() / T::from_i64(d).unwrap();
    let scale = x0.abs().max_of(frac(1, 10));
    let eps = vec![scale * frac(1, 10), scale * frac(1, 4), scale * frac(1, 2)];
    let half = horizon * frac(1, 2);
    let taus = [
        StoppingRule::deterministic(T::zero()),
        StoppingRule::deterministic(horizon * frac(1, 4)),
        StoppingRule::deterministic(half),
        StoppingRule::hit_above(x0 + scale * frac(1, 5), half),
        StoppingRule::hit_below(x0 - scale * frac(1, 5), half),
    ];
    let mut out = Vec::new();
    for tau in taus {
        let events = [
            EventPredicate::WholeSpace,
            EventPredicate::value_below_at(tau.clone(), x0),
            EventPredicate::value_above_at(tau.clone(), x0),
            EventPredicate::value_above_at(tau.clone(), x0 + scale * frac(1, 10)),
        ];
        for event in events {
            out.push(StarProbe::new(tau.clone(), event, horizon, eps.clone()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use num_rational::Rational64;
    use proptest::prelude::*;

    type R = StoppingRule<f64>;

    fn ens(paths: &[Vec<f64>]) -> PathEnsemble<f64> {
        let g = TimeGrid::integers(paths[0].len() - 1).unwrap();
        PathEnsemble::from_paths(g, paths, None).unwrap()
    }

    #[test]
    fn constant_process_is_consistent() {
        let e = ens(&vec![vec![2.0; 5]; 150]);
        let probe = StarProbe::new(R::deterministic(1.0), EventPredicate::WholeSpace, 4.0, vec![1e-6, 0.5]);
        let rep = star_probe(&e, &probe, StarConfig::default()).unwrap();
        for entry in &rep.entries {
            assert_eq!(entry.p_hat, 1.0);
            assert_eq!(entry.verdict, StarVerdict::Consistent);
        }
    }

    #[test]
    fn sure_drop_is_a_suspected_violation() {
        let e = ens(&vec![vec![1.0, 0.8, 0.0]; 200]);
        let probe = StarProbe::new(R::deterministic(0.0), EventPredicate::WholeSpace, 2.0, vec![0.5, 2.0]);
        let rep = star_probe(&e, &probe, StarConfig::default()).unwrap();
        assert_eq!(rep.entries[0].p_hat, 0.0);
        assert_eq!(rep.entries[0].verdict, StarVerdict::ViolationSuspected);
        assert_eq!(rep.entries[1].verdict, StarVerdict::Consistent);
        assert_eq!(rep.verdict(), StarVerdict::ViolationSuspected);
    }

    #[test]
    fn thin_or_empty_events_are_underpowered() {
        let e = ens(&vec![vec![1.0, 0.0]; 50]);
        let probe = StarProbe::new(R::deterministic(0.0), EventPredicate::WholeSpace, 1.0, vec![0.5]);
        let rep = star_probe(&e, &probe, StarConfig::default()).unwrap();
        assert_eq!(rep.entries[0].verdict, StarVerdict::Underpowered);
        let empty = StarProbe::new(R::deterministic(0.0), EventPredicate::empty(), 1.0, vec![0.1, 0.5]);
        let rep = star_probe(&e, &empty, StarConfig { min_count: 1 }).unwrap();
        assert!(rep.entries.iter().all(|x| x.verdict == StarVerdict::Underpowered));
        assert!(rep.entries.iter().all(|x| x.p_a == 0.0));
    }

    #[test]
    fn probe_validation() {
        let e = ens(&[vec![1.0, 0.0]]);
        let beyond = StarProbe::new(R::deterministic(0.0), EventPredicate::WholeSpace, 3.0, vec![0.5]);
        assert!(matches!(
            star_probe(&e, &beyond, StarConfig::default()),
            Err(Error::Domain(_))
        ));
        let bad_eps = StarProbe::new(R::deterministic(0.0), EventPredicate::WholeSpace, 1.0, vec![0.0]);
        assert!(star_probe(&e, &bad_eps, StarConfig::default()).is_err());
        assert!(matches!(
            star_scan(&e, &[], StarConfig::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn standard_family_has_twenty_probes() {
        assert!(standard_probe_family(1.0, 1.0).len() >= 20);
    }

    fn exact(raw: &[Vec<i64>]) -> PathEnsemble<Rational64> {
        let g = TimeGrid::integers(raw[0].len() - 1).unwrap();
        let paths: Vec<Vec<Rational64>> = raw
            .iter()
            .map(|p| p.iter().map(|&v| Rational64::from_integer(v)).collect())
            .collect();
        PathEnsemble::from_paths(g, &paths, None).unwrap()
    }

    proptest! {
        #[test]
        fn p_hat_is_monotone_in_eps_and_bounded_by_p_a(
            raw in proptest::collection::vec(proptest::collection::vec(-4i64..4, 5), 1..12),
            level in -3i64..3,
        ) {
            let e = exact(&raw);
            let r = Rational64::from_integer;
            let tau = StoppingRule::hit_below(r(level), r(2));
            let probe = StarProbe::new(
                tau.clone(),
                EventPredicate::value_above_at(tau, r(-2)),
                r(4),
                vec![Rational64::new(1, 2), r(1), r(2), r(5)],
            );
            let rep = star_probe(&e, &probe, StarConfig { min_count: 1 }).unwrap();
            for w in rep.entries.windows(2) {
                prop_assert!(w[0].p_hat <= w[1].p_hat);
            }
            for entry in &rep.entries {
                prop_assert!(entry.p_hat <= entry.p_a);
            }
        }

        #[test]
        fn affine_maps_rescale_epsilon_exactly(
            raw in proptest::collection::vec(proptest::collection::vec(-4i64..4, 4), 1..10),
            alpha_num in 1i64..7,
            alpha_den in 1i64..5,
            beta in -5i64..5,
        ) {
            let e = exact(&raw);
            let alpha = Rational64::new(alpha_num, alpha_den);
            let beta = Rational64::from_integer(beta);
            let mapped = e.with_values(e.values().iter().map(|&x| alpha * x + beta).collect()).unwrap();
            let r = Rational64::from_integer;
            let eps = vec![Rational64::new(1, 2), r(1), r(3)];
            let probe = StarProbe::new(StoppingRule::deterministic(r(1)), EventPredicate::WholeSpace, r(3), eps.clone());
            let scaled = StarProbe { epsilons: eps.iter().map(|&x| alpha * x).collect(), ..probe.clone() };
            let a = star_probe(&e, &probe, StarConfig::default()).unwrap();
            let b = star_probe(&mapped, &scaled, StarConfig::default()).unwrap();
            for (x, y) in a.entries.iter().zip(&b.entries) {
                prop_assert_eq!(x.p_hat, y.p_hat);
            }
        }
    }
}
