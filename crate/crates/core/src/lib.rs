//! Simulation laboratory for no-arbitrage properties of price processes under
//! simple trading strategies.
//!
//! The crate simulates strict local martingales and their martingale
//! counterparts, tests the "stays above `X_tau - eps` with positive
//! probability" property on adapted events, searches for and constructively
//! extracts simple arbitrage strategies, and checks the stopping-time-pair
//! characterization of shortsale-restricted arbitrage exhaustively on finite
//! lattices.
//!
//! Most types are generic over [`Scalar`]; simulation needs [`Real`]. The
//! aliases below fix the two instantiations used in practice: `f64` for
//! Monte Carlo and [`Rational`] for exact lattices.

pub mod constructive;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod process;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod star;
pub mod stats;
pub mod stopping;
pub mod strategy;
pub mod transforms;

pub use ensemble::PathEnsemble;
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use rng::SeedInfo;
pub use scalar::{Real, Scalar};

/// Exact scalar used by lattice computations.
pub type Rational = num_rational::Rational64;

pub type Grid = TimeGrid<f64>;
pub type Ensemble = PathEnsemble<f64>;
pub type ExactGrid = TimeGrid<Rational>;
pub type ExactEnsemble = PathEnsemble<Rational>;
pub type SingleGrid = TimeGrid<f32>;
pub type SingleEnsemble = PathEnsemble<f32>;
pub type Process = process::ProcessSpec<f64>;
pub type Rule = stopping::StoppingRule<f64>;
pub type Event = stopping::EventPredicate<f64>;
pub type Strategy = strategy::SimpleStrategy<f64>;
pub type ExactStrategy = strategy::SimpleStrategy<Rational>;
pub type Probe = star::StarProbe<f64>;
pub type Map = transforms::MonotoneMap<f64>;
pub type ExactLattice = lattice::Lattice<Rational>;
