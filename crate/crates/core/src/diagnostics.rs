//! Martingale defect tables and stopped-pair supermartingale checks.

use std::fmt;

use rayon::prelude::*;

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{weighted_mean, MeanEstimate};
use crate::stopping::StoppingRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectClass {
    MartingaleConsistent,
    StrictLocalSuspected,
    Inconclusive,
}

impl DefectClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MartingaleConsistent => "MARTINGALE_CONSISTENT",
            Self::StrictLocalSuspected => "STRICT_LOCAL_SUSPECTED",
            Self::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl fmt::Display for DefectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectConfig {
    /// `z` at or above which a strict local martingale is suspected.
    pub z_strict: f64,
    /// Every `|z|` must stay below this for a martingale-consistent call.
    pub z_consistent: f64,
}

impl Default for DefectConfig {
    fn default() -> Self {
        Self {
            z_strict: 5.0,
            z_consistent: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectRow {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    /// `X_0 - E[X_t]`.
    pub defect: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectTable {
    pub rows: Vec<DefectRow>,
    pub classification: DefectClass,
    pub config: DefectConfig,
}

impl DefectTable {
    pub fn max_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `a / b`, reading `0 / 0` as 0 and `x / 0` as a signed infinity.
fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        a.signum() * f64::INFINITY
    }
}

pub fn martingale_defect<T: Scalar>(ensemble: &PathEnsemble<T>, times: &[T]) -> Result<DefectTable> {
    martingale_defect_with(ensemble, times, DefectConfig::default())
}

/// Estimates `X_0 - E[X_t]` at each requested grid time. The defect is the
/// weighted mean of the per-path differences, so it is exactly 0 at `t = 0`.
pub fn martingale_defect_with<T: Scalar>(
    ensemble: &PathEnsemble<T>,
    times: &[T],
    config: DefectConfig,
) -> Result<DefectTable> {
    if times.is_empty() {
        return Err(Error::Argument("no times requested for the defect table".into()));
    }
    let grid = ensemble.grid();
    let weights = ensemble.weights_f64();
    let start = ensemble.column(0);
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let k = grid.index_of(t)?;
        let col = ensemble.column(k);
        let values: Vec<f64> = col.iter().map(|x| x.to_f64_lossy()).collect();
        let diffs: Vec<f64> = start.iter().zip(&col).map(|(&a, &b)| (a - b).to_f64_lossy()).collect();
        let MeanEstimate { mean, .. } = weighted_mean(&values, &weights);
        let d = weighted_mean(&diffs, &weights);
        rows.push(DefectRow {
            t: grid.time(k).to_f64_lossy(),
            mean,
            std_error: d.std_error,
            defect: d.mean,
            z: ratio(d.mean, d.std_error),
        });
    }
    let classification = classify(&rows, config);
    Ok(DefectTable {
        rows,
        classification,
        config,
    })
}

fn classify(rows: &[DefectRow], config: DefectConfig) -> DefectClass {
    if rows.iter().any(|r| r.z >= config.z_strict) {
        DefectClass::StrictLocalSuspected
    } else if rows.iter().all(|r| r.z.abs() < config.z_consistent) {
        DefectClass::MartingaleConsistent
    } else {
        DefectClass::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCheck {
    pub mean_start: f64,
    pub mean_end: f64,
    /// `E[X_start] - E[X_end]`.
    pub drop: f64,
    pub std_error: f64,
    pub z: f64,
    /// `E[X_end] <= E[X_start] + 3 std_error`.
    pub supermartingale_consistent: bool,
}

/// Compares `E[X_tau0]` with `E[X_tau1]` for each pair.
pub fn stopped_pair_check<T: Scalar>(
    ensemble: &PathEnsemble<T>,
    pairs: &[(StoppingRule<T>, StoppingRule<T>)],
) -> Result<Vec<PairCheck>> {
    let grid = ensemble.grid();
    let weights = ensemble.weights_f64();
    pairs
        .iter()
        .map(|(tau0, tau1)| {
            let stopped: Vec<(f64, f64, f64)> = (0..ensemble.n_paths())
                .into_par_iter()
                .map(|i| {
                    let path = ensemble.path(i);
                    let a = path[tau0.resolve(path, grid)?];
                    let b = path[tau1.resolve(path, grid)?];
                    Ok((a.to_f64_lossy(), b.to_f64_lossy(), (a - b).to_f64_lossy()))
                })
                .collect::<Result<_>>()?;
            let pick = |f: fn(&(f64, f64, f64)) -> f64| stopped.iter().map(f).collect::<Vec<_>>();
            let start = weighted_mean(&pick(|s| s.0), &weights);
            let end = weighted_mean(&pick(|s| s.1), &weights);
            let d = weighted_mean(&pick(|s| s.2), &weights);
            Ok(PairCheck {
                mean_start: start.mean,
                mean_end: end.mean,
                drop: d.mean,
                std_error: d.std_error,
                z: ratio(d.mean, d.std_error),
                supermartingale_consistent: -d.mean <= 3.0 * d.std_error,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::process::{simulate_ensemble, ProcessSpec};

    #[test]
    fn empty_times_are_rejected() {
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        let e = PathEnsemble::uniform(g, vec![1.0; 6]).unwrap();
        assert!(matches!(martingale_defect(&e, &[]), Err(Error::Argument(_))));
        assert!(martingale_defect(&e, &[0.3]).is_err());
    }

    #[test]
    fn constant_process_has_no_defect() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let e = PathEnsemble::uniform(g, vec![2.5; 50]).unwrap();
        let t = martingale_defect(&e, &[0.0, 0.5, 1.0]).unwrap();
        assert!(t.rows.iter().all(|r| r.defect == 0.0 && r.z == 0.0));
        assert_eq!(t.classification, DefectClass::MartingaleConsistent);
        let pairs = [(StoppingRule::deterministic(0.0), StoppingRule::hit_above(3.0, 1.0))];
        let p = stopped_pair_check(&e, &pairs).unwrap();
        assert_eq!(p[0].drop, 0.0);
    }

    #[test]
    fn deterministic_loss_is_flagged() {
        let g = TimeGrid::uniform(1.0, 1).unwrap();
        let e = PathEnsemble::from_paths(g, &[vec![1.0, 0.5], vec![1.0, 0.5]], None).unwrap();
        let t = martingale_defect(&e, &[1.0]).unwrap();
        assert_eq!(t.rows[0].z, f64::INFINITY);
        assert_eq!(t.classification, DefectClass::StrictLocalSuspected);
    }

    #[test]
    fn gbm_is_martingale_consistent() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let e = simulate_ensemble(&ProcessSpec::DriftlessGbm { x0: 1.0, sigma: 1.0 }, &g, 20_000, 2).unwrap();
        let t = martingale_defect(&e, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(t.rows[0].defect, 0.0);
        assert_eq!(t.classification, DefectClass::MartingaleConsistent, "{:?}", t.rows);
    }

    #[test]
    fn inverse_bessel_loses_mass_and_is_permutation_invariant() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let e = simulate_ensemble(&ProcessSpec::InverseBessel3 { x0: 1.0 }, &g, 20_000, 4).unwrap();
        let t = martingale_defect(&e, &[0.25, 0.5, 1.0]).unwrap();
        assert_eq!(t.classification, DefectClass::StrictLocalSuspected);
        for w in t.rows.windows(2) {
            assert!(w[1].defect >= w[0].defect - 3.0 * w[1].std_error);
        }
        let order: Vec<usize> = (0..e.n_paths()).rev().collect();
        let t2 = martingale_defect(&e.permuted(&order).unwrap(), &[0.25, 0.5, 1.0]).unwrap();
        assert_eq!(t.classification, t2.classification);
        let pairs = [(StoppingRule::deterministic(0.0), StoppingRule::deterministic(1.0))];
        let p = stopped_pair_check(&e, &pairs).unwrap();
        assert!((p[0].drop - t.rows[2].defect).abs() < 1e-12);
        assert!(p[0].supermartingale_consistent);
    }

    #[test]
    fn stopped_gbm_shows_no_positive_drift() {
        let g = TimeGrid::uniform(1.0, 64).unwrap();
        let e = simulate_ensemble(&ProcessSpec::DriftlessGbm { x0: 1.0, sigma: 0.5 }, &g, 10_000, 8).unwrap();
        let pairs = [(StoppingRule::hit_above(1.2, 1.0), StoppingRule::deterministic(1.0))];
        let p = stopped_pair_check(&e, &pairs).unwrap();
        assert!(p[0].supermartingale_consistent);
        assert!(p[0].z.abs() < 4.0, "{:?}", p[0]);
    }
}
