//! Path simulators for the process zoo.
//!
//! Exact schemes are used where the transition law is available at grid
//! points (Brownian motion, driftless GBM, integer-dimension Bessel processes
//! and their inverses). The CEV model uses Euler-Maruyama with full truncation
//! and absorption at zero; non-integer Bessel dimensions step the squared
//! process the same way. Each ensemble records its scheme in its metadata.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::SeedInfo;
use crate::scalar::{Real, Scalar};

/// Declarative description of a simulated price process.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessSpec<T> {
    BrownianMotion {
        x0: T,
        sigma: T,
    },
    /// `x0 * exp(sigma W_t - sigma^2 t / 2)`.
    DriftlessGbm {
        x0: T,
        sigma: T,
    },
    /// `dX = a X dt + b X^rho dW`.
    Cev {
        x0: T,
        a: T,
        b: T,
        rho: T,
    },
    /// Euclidean norm of a `delta`-dimensional Brownian motion.
    Bessel {
        x0: T,
        delta: T,
    },
    /// Reciprocal of a three-dimensional Bessel process started at `1 / x0`.
    InverseBessel3 {
        x0: T,
    },
    /// Brownian motion from 1 run on the clock `tan(pi t / 2)`, absorbed at 0,
    /// and equal to 0 at `t = 1`.
    DsExample,
    /// `exp(-|W_t|^(1 / (2n + 1)))`.
    AbsBmTransform {
        n: u32,
    },
}

impl<T: Real> ProcessSpec<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BrownianMotion { .. } => "brownian",
            Self::DriftlessGbm { .. } => "gbm",
            Self::Cev { .. } => "cev",
            Self::Bessel { .. } => "bessel",
            Self::InverseBessel3 { .. } => "inverse_bessel3",
            Self::DsExample => "ds_example",
            Self::AbsBmTransform { .. } => "abs_bm_transform",
        }
    }

    /// Whether every path of this process stays non-negative.
    pub fn is_nonnegative(&self) -> bool {
        !matches!(self, Self::BrownianMotion { .. })
    }

    pub fn initial_value(&self) -> T {
        match *self {
            Self::BrownianMotion { x0, .. }
            | Self::DriftlessGbm { x0, .. }
            | Self::Cev { x0, .. }
            | Self::Bessel { x0, .. }
            | Self::InverseBessel3 { x0 } => x0,
            Self::DsExample | Self::AbsBmTransform { .. } => T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg = |name: &str, v: T| {
            if v >= T::zero() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be non-negative, got {v}")))
            }
        };
        match *self {
            Self::BrownianMotion { sigma, x0 } => {
                if !x0.is_finite() {
                    return Err(Error::Parameter("x0 must be finite".into()));
                }
                nonneg("sigma", sigma)
            }
            Self::DriftlessGbm { x0, sigma } => {
                positive("x0", x0)?;
                nonneg("sigma", sigma)
            }
            Self::Cev { x0, a, b, rho } => {
                positive("x0", x0)?;
                positive("rho", rho)?;
                nonneg("b", b)?;
                if !a.is_finite() {
                    return Err(Error::Parameter("a must be finite".into()));
                }
                Ok(())
            }
            Self::Bessel { x0, delta } => {
                positive("x0", x0)?;
                if delta <= T::from_f64_lossy(2.0) {
                    return Err(Error::Parameter(format!("delta must exceed 2, got {delta}")));
                }
                Ok(())
            }
            Self::InverseBessel3 { x0 } => positive("x0", x0),
            Self::DsExample | Self::AbsBmTransform { .. } => Ok(()),
        }
    }

    /// Human-readable name of the active discretization scheme.
    pub fn scheme(&self) -> String {
        match *self {
            Self::BrownianMotion { .. } => "exact Gaussian increments".into(),
            Self::DriftlessGbm { .. } => "exact log-normal increments".into(),
            Self::Cev { rho, .. } => format!("Euler-Maruyama, full truncation, absorbed at 0 (rho = {rho})"),
            Self::Bessel { delta, .. } => match integer_dimension(delta) {
                Some(d) => format!("exact: norm of {d}-dimensional Gaussian walk"),
                None => "squared-Bessel Euler with full truncation".into(),
            },
            Self::InverseBessel3 { .. } => "exact: reciprocal norm of 3-dimensional Gaussian walk".into(),
            Self::DsExample => "exact Gaussian increments on the tan clock with Brownian-bridge absorption; \
                 value forced to 0 at t = 1"
                .into(),
            Self::AbsBmTransform { .. } => "exact Gaussian increments, pointwise map".into(),
        }
    }
}

fn integer_dimension<T: Real>(delta: T) -> Option<usize> {
    let d = delta.to_f64_lossy();
    (d.fract() == 0.0 && (1.0..=64.0).contains(&d)).then_some(d as usize)
}

/// Simulation knobs beyond the process itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Internal steps per output grid interval.
    pub substeps: usize,
    /// Scenario identifier mixed into the per-path streams.
    pub scenario: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            substeps: 1,
            scenario: 0,
        }
    }
}

/// Simulates `n_paths` paths on `grid` with scenario id 0 and no substeps.
pub fn simulate_ensemble<T: Real>(
    spec: &ProcessSpec<T>,
    grid: &TimeGrid<T>,
    n_paths: usize,
    master_seed: u64,
) -> Result<PathEnsemble<T>> {
    simulate_ensemble_with(spec, grid, n_paths, master_seed, SimOptions::default())
}

pub fn simulate_ensemble_with<T: Real>(
    spec: &ProcessSpec<T>,
    grid: &TimeGrid<T>,
    n_paths: usize,
    master_seed: u64,
    options: SimOptions,
) -> Result<PathEnsemble<T>> {
    spec.validate()?;
    if n_paths == 0 {
        return Err(Error::Parameter("n_paths must be at least 1".into()));
    }
    if options.substeps == 0 {
        return Err(Error::Parameter("substeps must be at least 1".into()));
    }
    if matches!(spec, ProcessSpec::DsExample) && grid.horizon() > T::one() + T::grid_tolerance() {
        return Err(Error::Domain(format!(
            "the DS example lives on [0, 1]; grid horizon is {}",
            grid.horizon()
        )));
    }
    let seed = SeedInfo::new(master_seed, options.scenario);
    let times = fine_times(grid, options.substeps);
    let n = grid.len();
    let mut values = vec![T::zero(); n * n_paths];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let mut rng = seed.path_rng(i as u64);
        simulate_path(spec, &times, options.substeps, &mut rng, row);
    });
    Ok(PathEnsemble::uniform(grid.clone(), values)?
        .with_seed_info(seed)
        .with_metadata("process", spec.name())
        .with_metadata("scheme", spec.scheme())
        .with_metadata("substeps", options.substeps.to_string()))
}

fn fine_times<T: Real>(grid: &TimeGrid<T>, substeps: usize) -> Vec<T> {
    let m = T::from_usize_exact(substeps);
    let mut out = Vec::with_capacity((grid.len() - 1) * substeps + 1);
    for w in grid.points().windows(2) {
        for k in 0..substeps {
            out.push(w[0] + (w[1] - w[0]) * T::from_usize_exact(k) / m);
        }
    }
    out.push(grid.horizon());
    out
}

fn normal<T: Real>(rng: &mut ChaCha8Rng) -> T {
    T::from_f64_lossy(rng.sample::<f64, _>(StandardNormal))
}

/// Fills `row` with one path. `times` is the fine grid; every `substeps`-th
/// fine point is an output point.
fn simulate_path<T: Real>(spec: &ProcessSpec<T>, times: &[T], substeps: usize, rng: &mut ChaCha8Rng, row: &mut [T]) {
    let mut emit = |k: usize, v: T, row: &mut [T]| {
        if k.is_multiple_of(substeps) {
            row[k / substeps] = v;
        }
    };
    match *spec {
        ProcessSpec::BrownianMotion { x0, sigma } => {
            let mut x = x0;
            emit(0, x, row);
            for k in 1..times.len() {
                let dt = times[k] - times[k - 1];
                x = x + sigma * dt.sqrt() * normal::<T>(rng);
                emit(k, x, row);
            }
        }
        ProcessSpec::DriftlessGbm { x0, sigma } => {
            let half = T::from_f64_lossy(0.5);
            let mut log_x = T::zero();
            emit(0, x0, row);
            for k in 1..times.len() {
                let dt = times[k] - times[k - 1];
                log_x = log_x - half * sigma * sigma * dt + sigma * dt.sqrt() * normal::<T>(rng);
                emit(k, x0 * log_x.exp(), row);
            }
        }
        ProcessSpec::Cev { x0, a, b, rho } => {
            let mut x = x0;
            emit(0, x, row);
            for k in 1..times.len() {
                let dt = times[k] - times[k - 1];
                let z = normal::<T>(rng);
                if x > T::zero() {
                    let xp = x.max(T::zero());
                    x = x + a * xp * dt + b * xp.powf(rho) * dt.sqrt() * z;
                    if x <= T::zero() || !x.is_finite() {
                        x = T::zero();
                    }
                }
                emit(k, x, row);
            }
        }
        ProcessSpec::Bessel { x0, delta } => match integer_dimension(delta) {
            Some(d) => gaussian_norm_walk(x0, d, times, rng, |r| r, &mut emit, row),
            None => {
                let two = T::from_f64_lossy(2.0);
                let mut q = x0 * x0;
                emit(0, x0, row);
                for k in 1..times.len() {
                    let dt = times[k] - times[k - 1];
                    let qp = q.max(T::zero());
                    q = q + delta * dt + two * qp.sqrt() * dt.sqrt() * normal::<T>(rng);
                    emit(k, q.max(T::zero()).sqrt(), row);
                }
            }
        },
        ProcessSpec::InverseBessel3 { x0 } => {
            gaussian_norm_walk(x0.recip(), 3, times, rng, |r| r.recip(), &mut emit, row)
        }
        ProcessSpec::DsExample => {
            let half_pi = T::FRAC_PI_2();
            let two = T::from_f64_lossy(2.0);
            let one = T::one();
            let mut b = one;
            emit(0, b, row);
            let mut clock = T::zero();
            for (k, &t) in times.iter().enumerate().skip(1) {
                if t >= one - T::grid_tolerance() {
                    b = T::zero();
                    emit(k, b, row);
                    continue;
                }
                let next_clock = (half_pi * t).tan();
                let du = next_clock - clock;
                clock = next_clock;
                let z = normal::<T>(rng);
                let u: f64 = rng.random();
                if b > T::zero() {
                    let next = b + du.sqrt() * z;
                    // Probability that the Brownian bridge between the two
                    // positive endpoints touched zero.
                    let crossed = next <= T::zero() || T::from_f64_lossy(u) < (-two * b * next / du).exp();
                    b = if crossed { T::zero() } else { next };
                }
                emit(k, b, row);
            }
        }
        ProcessSpec::AbsBmTransform { n } => {
            let exponent = T::one() / T::from_u32(2 * n + 1).expect("small integer");
            let mut w = T::zero();
            emit(0, T::one(), row);
            for k in 1..times.len() {
                let dt = times[k] - times[k - 1];
                w = w + dt.sqrt() * normal::<T>(rng);
                emit(k, (-w.abs().powf(exponent)).exp(), row);
            }
        }
    }
}

fn gaussian_norm_walk<T: Real>(
    start: T,
    dim: usize,
    times: &[T],
    rng: &mut ChaCha8Rng,
    map: impl Fn(T) -> T,
    emit: &mut impl FnMut(usize, T, &mut [T]),
    row: &mut [T],
) {
    let mut coords = vec![T::zero(); dim];
    coords[0] = start;
    let norm = |c: &[T]| c.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
    emit(0, map(norm(&coords)), row);
    for k in 1..times.len() {
        let sd = (times[k] - times[k - 1]).sqrt();
        for c in coords.iter_mut() {
            *c = *c + sd * normal::<T>(rng);
        }
        emit(k, map(norm(&coords)), row);
    }
}

/// Cumulative sum of squared increments along each path.
pub fn realized_quadratic_variation<T: Scalar>(ensemble: &PathEnsemble<T>) -> Result<PathEnsemble<T>> {
    let n = ensemble.n_times();
    let mut out = Vec::with_capacity(ensemble.values().len());
    for path in ensemble.paths() {
        let mut acc = T::zero();
        out.push(acc);
        for w in path.windows(2) {
            let d = w[1] - w[0];
            acc = acc + d * d;
            out.push(acc);
        }
    }
    debug_assert_eq!(out.len(), n * ensemble.n_paths());
    ensemble
        .with_values(out)
        .map(|e| e.with_metadata("transform", "realized quadratic variation"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(steps: usize) -> TimeGrid<f64> {
        TimeGrid::uniform(1.0, steps).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        let g = unit_grid(4);
        let bad = [
            ProcessSpec::Cev {
                x0: 1.0,
                a: 0.0,
                b: 1.0,
                rho: 0.0,
            },
            ProcessSpec::Bessel { x0: 1.0, delta: 2.0 },
            ProcessSpec::InverseBessel3 { x0: 0.0 },
            ProcessSpec::DriftlessGbm { x0: -1.0, sigma: 1.0 },
        ];
        for spec in bad {
            assert!(matches!(simulate_ensemble(&spec, &g, 4, 1), Err(Error::Parameter(_))));
        }
        let long = TimeGrid::uniform(2.0, 4).unwrap();
        assert!(matches!(
            simulate_ensemble(&ProcessSpec::DsExample, &long, 4, 1),
            Err(Error::Domain(_))
        ));
        let spec = ProcessSpec::BrownianMotion { x0: 0.0, sigma: 1.0 };
        assert!(simulate_ensemble(&spec, &g, 0, 1).is_err());
    }

    #[test]
    fn zero_volatility_brownian_is_identically_zero() {
        let spec = ProcessSpec::BrownianMotion { x0: 0.0, sigma: 0.0 };
        let e = simulate_ensemble(&spec, &unit_grid(16), 50, 3).unwrap();
        assert!(e.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ds_example_starts_at_one_and_ends_at_zero() {
        let e = simulate_ensemble(&ProcessSpec::DsExample, &unit_grid(64), 500, 11).unwrap();
        for p in e.paths() {
            assert_eq!(p[0], 1.0);
            assert_eq!(p[64], 0.0);
            assert!(p.iter().all(|&v| v >= 0.0));
            // once absorbed, stays at zero
            if let Some(k) = p.iter().position(|&v| v == 0.0) {
                assert!(p[k..].iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn ds_example_on_shorter_horizon_is_not_forced() {
        let g = TimeGrid::uniform(0.5, 8).unwrap();
        let e = simulate_ensemble(&ProcessSpec::DsExample, &g, 200, 2).unwrap();
        assert!(e.column(8).iter().any(|&v| v > 0.0));
    }

    #[test]
    fn simulation_is_deterministic_across_thread_counts() {
        let spec = ProcessSpec::Cev {
            x0: 1.0,
            a: 0.0,
            b: 1.0,
            rho: 1.5,
        };
        let g = unit_grid(32);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_ensemble(&spec, &g, 300, 99).unwrap())
        };
        let a = run(1);
        let b = run(4);
        let bits = |e: &PathEnsemble<f64>| e.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn nonnegative_variants_stay_nonnegative() {
        let g = unit_grid(64);
        let specs = [
            ProcessSpec::Cev {
                x0: 0.2,
                a: 0.0,
                b: 1.0,
                rho: 0.5,
            },
            ProcessSpec::Cev {
                x0: 1.0,
                a: 0.0,
                b: 1.0,
                rho: 1.5,
            },
            ProcessSpec::Bessel { x0: 0.1, delta: 2.5 },
            ProcessSpec::DriftlessGbm { x0: 1.0, sigma: 2.0 },
            ProcessSpec::AbsBmTransform { n: 1 },
        ];
        for spec in specs {
            let e = simulate_ensemble(&spec, &g, 400, 5).unwrap();
            assert!(e.min_value() >= 0.0, "{}", spec.name());
        }
    }

    #[test]
    fn cev_with_small_rho_absorbs() {
        let spec = ProcessSpec::Cev {
            x0: 0.05,
            a: 0.0,
            b: 1.0,
            rho: 0.5,
        };
        let e = simulate_ensemble(&spec, &unit_grid(128), 400, 8).unwrap();
        let absorbed = e.column(128).iter().filter(|&&v| v == 0.0).count();
        assert!(absorbed > 0);
    }

    #[test]
    fn bessel3_squared_is_sum_of_three_squared_coordinates() {
        // Rebuild the coordinates from the same streams and compare.
        let g = unit_grid(16);
        let e = simulate_ensemble(&ProcessSpec::Bessel { x0: 1.0, delta: 3.0 }, &g, 20, 4).unwrap();
        let seed = SeedInfo::new(4, 0);
        for i in 0..20 {
            let mut rng = seed.path_rng(i as u64);
            let mut c = [1.0_f64, 0.0, 0.0];
            for k in 1..=16 {
                let sd = (g.time(k) - g.time(k - 1)).sqrt();
                for x in c.iter_mut() {
                    *x += sd * rng.sample::<f64, _>(StandardNormal);
                }
                let sq = c.iter().map(|x| x * x).sum::<f64>();
                let v = e.path(i)[k];
                assert!((v * v - sq).abs() <= 1e-12 * sq.max(1.0));
            }
        }
    }

    #[test]
    fn substeps_keep_output_grid() {
        let spec = ProcessSpec::BrownianMotion { x0: 1.0, sigma: 1.0 };
        let options = SimOptions {
            substeps: 8,
            scenario: 3,
        };
        let e = simulate_ensemble_with(&spec, &unit_grid(4), 10, 1, options).unwrap();
        assert_eq!(e.n_times(), 5);
        assert!(e.metadata().iter().any(|(k, v)| k == "substeps" && v == "8"));
    }

    #[test]
    fn quadratic_variation_of_smooth_and_constant_paths() {
        let h = 1.0 / 64.0;
        let g = unit_grid(64);
        let linear: Vec<f64> = g.points().to_vec();
        let constant = vec![3.0; 65];
        let e = PathEnsemble::from_paths(g, &[linear, constant], None).unwrap();
        let qv = realized_quadratic_variation(&e).unwrap();
        assert!((qv.path(0)[64] - h).abs() < 1e-15);
        assert!(qv.path(1).iter().all(|&v| v == 0.0));
        assert_eq!(qv.path(0)[0], 0.0);
    }
}
