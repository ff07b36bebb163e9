use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::SeedInfo;
use crate::scalar::Scalar;
use crate::stats::pairwise_sum;

/// Discretized sample paths on a common grid with per-path probabilities.
///
/// Values are stored row-major: path `i` occupies
/// `values[i * n_times .. (i + 1) * n_times]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble<T> {
    grid: TimeGrid<T>,
    values: Vec<T>,
    weights: Vec<T>,
    uniform: bool,
    seed_info: Option<SeedInfo>,
    metadata: Vec<(String, String)>,
}

impl<T: Scalar> PathEnsemble<T> {
    /// Equal-weight ensemble from a flat row-major value buffer.
    pub fn uniform(grid: TimeGrid<T>, values: Vec<T>) -> Result<Self> {
        let n = grid.len();
        if values.is_empty() || !values.len().is_multiple_of(n) {
            return Err(Error::Validation(format!(
                "value buffer of length {} is not a positive multiple of the grid length {n}",
                values.len()
            )));
        }
        let n_paths = values.len() / n;
        let w = T::one() / T::from_usize_exact(n_paths);
        Ok(Self {
            grid,
            values,
            weights: vec![w; n_paths],
            uniform: true,
            seed_info: None,
            metadata: Vec::new(),
        })
    }

    pub fn from_paths(grid: TimeGrid<T>, paths: &[Vec<T>], weights: Option<Vec<T>>) -> Result<Self> {
        let n = grid.len();
        if let Some(i) = paths.iter().position(|p| p.len() != n) {
            return Err(Error::Validation(format!(
                "path {i} has {} values, grid has {n}",
                paths[i].len()
            )));
        }
        let values: Vec<T> = paths.iter().flatten().copied().collect();
        let mut ens = Self::uniform(grid, values)?;
        if let Some(w) = weights {
            ens = ens.with_weights(w)?;
        }
        Ok(ens)
    }

    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self> {
        if weights.len() != self.n_paths() {
            return Err(Error::Validation(format!(
                "{} weights for {} paths",
                weights.len(),
                self.n_paths()
            )));
        }
        if let Some(i) = weights.iter().position(|w| *w < T::zero()) {
            return Err(Error::Validation(format!("negative weight on path {i}")));
        }
        check_sums_to_one(&weights)?;
        self.uniform = false;
        self.weights = weights;
        Ok(self)
    }

    pub fn with_seed_info(mut self, seed_info: SeedInfo) -> Self {
        self.seed_info = Some(seed_info);
        self
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.push((key.to_string(), value.into()));
        self
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.weights.len()
    }

    pub fn n_times(&self) -> usize {
        self.grid.len()
    }

    pub fn path(&self, i: usize) -> &[T] {
        let n = self.n_times();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn paths(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.values.chunks_exact(self.n_times())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.to_f64_lossy()).collect()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn seed_info(&self) -> Option<SeedInfo> {
        self.seed_info
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    /// Values at one grid index across all paths.
    pub fn column(&self, index: usize) -> Vec<T> {
        self.paths().map(|p| p[index]).collect()
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(self.values[0], T::min_of)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(self.values[0], T::max_of)
    }

    /// Same grid, weights and provenance with new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Validation("value buffer size changed".into()));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values,
            weights: self.weights.clone(),
            uniform: self.uniform,
            seed_info: self.seed_info,
            metadata: self.metadata.clone(),
        })
    }

    /// Reorders paths (weights travel with their path).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n_paths()];
        for &i in order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Argument("order is not a permutation".into()));
            }
        }
        if order.len() != self.n_paths() {
            return Err(Error::Argument("order is not a permutation".into()));
        }
        let values = order.iter().flat_map(|&i| self.path(i).iter().copied()).collect();
        let weights = order.iter().map(|&i| self.weights[i]).collect();
        Ok(Self {
            values,
            weights,
            ..self.clone()
        })
    }
}

fn check_sums_to_one<T: Scalar>(weights: &[T]) -> Result<()> {
    let ok = if T::EXACT {
        weights.iter().fold(T::zero(), |a, &w| a + w) == T::one()
    } else {
        let w: Vec<f64> = weights.iter().map(|w| w.to_f64_lossy()).collect();
        (pairwise_sum(&w) - 1.0).abs() <= T::sum_tolerance().to_f64_lossy()
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Validation("weights do not sum to 1".into()))
    }
}
