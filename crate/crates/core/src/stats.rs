//! Small statistical helpers shared by the Monte Carlo checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = crate::exec::pairwise_sum(samples) / n as f64;
        if n == 1 {
            return Self { mean, stderr: 0.0, n };
        }
        let ss: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = crate::exec::pairwise_sum(&ss) / (n - 1) as f64;
        Self { mean, stderr: (var / n as f64).sqrt(), n }
    }
}

/// Pearson chi-square statistic and upper-tail p-value for observed counts
/// against expected probabilities. Categories with zero expected probability
/// are skipped; degrees of freedom are `categories - 1`.
pub fn chi_square(observed: &[u64], probabilities: &[f64]) -> (f64, f64) {
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut categories = 0usize;
    for (&o, &p) in observed.iter().zip(probabilities) {
        if p <= 0.0 {
            continue;
        }
        let e = p * total as f64;
        stat += (o as f64 - e).powi(2) / e;
        categories += 1;
    }
    if categories < 2 {
        return (stat, 1.0);
    }
    let dist = ChiSquared::new((categories - 1) as f64).expect("positive degrees of freedom");
    (stat, 1.0 - dist.cdf(stat))
}

/// Least-squares fit of `y ≈ a + b / x`. Returns `(a, b, rms residual)`.
pub fn fit_inverse(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let u: Vec<f64> = x.iter().map(|v| 1.0 / v).collect();
    let su: f64 = u.iter().sum();
    let sy: f64 = y.iter().sum();
    let suu: f64 = u.iter().map(|v| v * v).sum();
    let suy: f64 = u.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * suu - su * su;
    let (a, b) = if det.abs() < 1e-300 {
        (sy / n, 0.0)
    } else {
        ((suu * sy - su * suy) / det, (n * suy - su * sy) / det)
    };
    let rms = (u
        .iter()
        .zip(y)
        .map(|(ui, yi)| (yi - a - b * ui).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (a, b, rms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_model() {
        let x = [8.0, 16.0, 32.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 0.3 / v).collect();
        let (a, b, rms) = fit_inverse(&x, &y);
        assert!((a - 0.5).abs() < 1e-12 && (b - 0.3).abs() < 1e-12 && rms < 1e-12);
    }

    #[test]
    fn chi_square_perfect_fit_has_unit_p() {
        let (stat, p) = chi_square(&[30, 70], &[0.3, 0.7]);
        assert!(stat.abs() < 1e-12);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_estimate_basic() {
        let m = MeanEstimate::from_samples(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
