use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Strictly increasing time points starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    points: Vec<T>,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Grid(format!("need at least 2 points, got {}", points.len())));
        }
        if points[0] != T::zero() {
            return Err(Error::Grid(format!("first point must be 0, got {}", points[0])));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Grid(format!(
                "points not strictly increasing at index {}: {} then {}",
                i + 1,
                points[i],
                points[i + 1]
            )));
        }
        Ok(Self { points })
    }

    /// `steps + 1` equally spaced points on `[0, horizon]`.
    pub fn uniform(horizon: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Grid("need at least one step".into()));
        }
        if horizon <= T::zero() {
            return Err(Error::Grid(format!("horizon must be positive, got {horizon}")));
        }
        let n = T::from_usize_exact(steps);
        let mut points: Vec<T> = (0..=steps).map(|i| horizon * T::from_usize_exact(i) / n).collect();
        points[steps] = horizon;
        Self::new(points)
    }

    /// Integer times `0, 1, ..., steps`.
    pub fn integers(steps: usize) -> Result<Self> {
        Self::new((0..=steps).map(T::from_usize_exact).collect())
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> T {
        self.points[self.points.len() - 1]
    }

    pub fn last_index(&self) -> usize {
        self.points.len() - 1
    }

    pub fn time(&self, index: usize) -> T {
        self.points[index]
    }

    /// Largest index whose time is `<= t` (up to grid tolerance).
    pub fn index_at_or_before(&self, t: T) -> Result<usize> {
        let tol = self.tolerance();
        if t > self.horizon() + tol {
            return Err(Error::Domain(format!(
                "time {t} is beyond the grid horizon {}",
                self.horizon()
            )));
        }
        if t < -tol {
            return Err(Error::Domain(format!("negative time {t}")));
        }
        Ok(self.points.partition_point(|&p| p <= t + tol).saturating_sub(1))
    }

    /// Smallest index whose time is `>= t` (up to grid tolerance).
    pub fn index_at_or_after(&self, t: T) -> Result<usize> {
        let tol = self.tolerance();
        if t > self.horizon() + tol {
            return Err(Error::Domain(format!(
                "time {t} is beyond the grid horizon {}",
                self.horizon()
            )));
        }
        let idx = self.points.partition_point(|&p| p < t - tol);
        Ok(idx.min(self.last_index()))
    }

    /// Index of a time that must lie on the grid.
    pub fn index_of(&self, t: T) -> Result<usize> {
        let idx = self.index_at_or_after(t)?;
        let diff = (self.points[idx] - t).abs();
        if diff > self.tolerance() {
            return Err(Error::Argument(format!("time {t} is not a grid point")));
        }
        Ok(idx)
    }

    fn tolerance(&self) -> T {
        T::grid_tolerance() * self.horizon().max_of(T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn rejects_malformed_grids() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.5, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::<f64>::uniform(1.0, 0).is_err());
    }

    #[test]
    fn uniform_grid_ends_exactly_at_horizon() {
        let g = TimeGrid::uniform(1.0, 1024).unwrap();
        assert_eq!(g.len(), 1025);
        assert_eq!(g.horizon(), 1.0);
        assert_eq!(g.time(512), 0.5);
    }

    #[test]
    fn index_lookup() {
        let g = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.index_at_or_before(1.5).unwrap(), 1);
        assert_eq!(g.index_at_or_after(1.5).unwrap(), 2);
        assert_eq!(g.index_at_or_before(2.0).unwrap(), 2);
        assert_eq!(g.index_of(1.0).unwrap(), 1);
        assert!(g.index_of(1.5).is_err());
        assert!(matches!(g.index_at_or_before(2.5), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_grid() {
        let g = TimeGrid::<Rational64>::uniform(Rational64::from_integer(1), 3).unwrap();
        assert_eq!(g.time(1), Rational64::new(1, 3));
        assert_eq!(g.index_of(Rational64::new(2, 3)).unwrap(), 2);
    }
}
