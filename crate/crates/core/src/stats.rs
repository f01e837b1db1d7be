//! Small statistics helpers used by the Monte Carlo estimators.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Mean and standard error of the mean (zero for fewer than two samples).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Index-of-dispersion test of counts against a Poisson law with matched
/// mean: `D = Σ (c_i − c̄)² / c̄ ~ χ²(n−1)`.
#[derive(Debug, Clone, Copy)]
pub struct DispersionTest {
    pub n_bins: usize,
    pub mean: f64,
    pub variance: f64,
    /// Variance over mean.
    pub fano: f64,
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

impl DispersionTest {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

pub fn poisson_dispersion_test(counts: &[u64]) -> Option<DispersionTest> {
    let n = counts.len();
    if n < 2 {
        return None;
    }
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if mean <= 0.0 {
        return None;
    }
    let var = variance(&xs);
    let statistic = var * (n - 1) as f64 / mean;
    let chi2 = ChiSquared::new((n - 1) as f64).ok()?;
    let lower = chi2.cdf(statistic);
    let p_value = (2.0 * lower.min(1.0 - lower)).min(1.0);
    Some(DispersionTest { n_bins: n, mean, variance: var, fano: var / mean, statistic, p_value })
}

/// Least-squares slope of `ys` against `xs`.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
