//! Small Monte Carlo summaries.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    /// `|mean - target| ≤ k · se`
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two points.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    MeanSe {
        mean: mean(xs),
        se: (sample_variance(xs) / n as f64).sqrt(),
        n,
    }
}

/// Sample variance with the large-sample standard error
/// `sqrt((m₄ - s⁴)/n)`.
pub fn variance_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    let m = mean(xs);
    let s2 = sample_variance(xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
    MeanSe {
        mean: s2,
        se: ((m4 - s2 * s2).max(0.0) / n as f64).sqrt(),
        n,
    }
}

/// Mean of a correlated series with a batch-means standard error.
pub fn batch_means(xs: &[f64], batches: usize) -> MeanSe {
    let b = batches.clamp(2, xs.len().max(2));
    let size = xs.len() / b;
    if size == 0 {
        return mean_se(xs);
    }
    let means: Vec<f64> = xs.chunks(size).take(b).map(mean).collect();
    MeanSe {
        mean: mean(xs),
        se: (sample_variance(&means) / b as f64).sqrt(),
        n: xs.len(),
    }
}

/// Weighted least-squares line `y ≈ a + b x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
}

/// Fit with weights `w_i = 1/var(y_i)`; `slope_se` assumes those variances
/// are correct.
pub fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Option<LineFit> {
    if x.len() < 2 || x.len() != y.len() || x.len() != w.len() {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| b * (a - xm) * (c - ym))
        .sum();
    let slope = sxy / sxx;
    Some(LineFit {
        intercept: ym - slope * xm,
        slope,
        slope_se: (1.0 / sxx).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let s = mean_se(&xs);
        assert_eq!(s.mean, 2.5);
        assert_relative_eq!(s.se, (5.0f64 / 3.0 / 4.0).sqrt());
        assert_relative_eq!(sample_variance(&xs), 5.0 / 3.0);
        assert!(s.within(2.6, 1.0));
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|t| 1.5 - 0.7 * t).collect();
        let f = weighted_line(&x, &y, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(f.slope, -0.7, max_relative = 1e-12);
        assert_relative_eq!(f.intercept, 1.5, max_relative = 1e-12);
        assert!(weighted_line(&[1.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn batch_means_of_constant_blocks() {
        let xs: Vec<f64> = (0..100).map(|i| (i / 50) as f64).collect();
        let b = batch_means(&xs, 2);
        assert_eq!(b.mean, 0.5);
        assert_relative_eq!(b.se, 0.5);
    }
}
