//! Order-fixed reductions and small estimators.
//!
//! All sums go through [`pairwise_sum`], whose tree shape depends only on the
//! input length, so results never depend on how many workers produced the
//! inputs.

const LEAF: usize = 64;

/// Pairwise (cascade) summation with a fixed leaf size.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Weighted mean and its standard error.
///
/// The standard error uses the Kish effective sample size, which reduces to
/// the usual `s / sqrt(n)` for uniform weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
}

pub fn weighted_mean(values: &[f64], weights: &[f64]) -> MeanEstimate {
    debug_assert_eq!(values.len(), weights.len());
    let total = pairwise_sum(weights);
    let products: Vec<f64> = values.iter().zip(weights).map(|(x, w)| x * w).collect();
    let mean = pairwise_sum(&products) / total;
    let sq: Vec<f64> = values
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - mean) * (x - mean))
        .collect();
    let var = pairwise_sum(&sq) / total;
    let w2: Vec<f64> = weights.iter().map(|w| (w / total) * (w / total)).collect();
    let n_eff = 1.0 / pairwise_sum(&w2);
    let std_error = if n_eff > 1.0 { (var / (n_eff - 1.0)).sqrt() } else { 0.0 };
    MeanEstimate { mean, std_error }
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a proportion observed as `p_hat` over `n` trials.
pub fn wilson_interval(p_hat: f64, n: f64, z: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 1.0);
    }
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if p_hat <= 0.0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if p_hat >= 1.0 { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_small_integers() {
        let xs: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn uniform_weights_give_textbook_standard_error() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let w = [0.25; 4];
        let est = weighted_mean(&xs, &w);
        assert_eq!(est.mean, 2.5);
        // sample variance 5/3, se = sqrt(5/3 / 4)
        assert!((est.std_error - (5.0_f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn wilson_interval_at_zero_excludes_nothing_below() {
        let (lo, hi) = wilson_interval(0.0, 100.0, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(0.5, 1e4, Z95);
        assert!(lo > 0.49 && hi < 0.51);
    }
}
