//! Small descriptive-statistics helpers shared across modules.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Rule for interpolating between order statistics when evaluating a
/// sample quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileRule {
    /// Linear interpolation between order statistics at position
    /// `h = (n - 1) q` (zero-based), a.k.a. Hyndman–Fan type 7.
    #[default]
    Linear,
}

impl QuantileRule {
    pub fn name(self) -> &'static str {
        match self {
            QuantileRule::Linear => "linear",
        }
    }
}

/// Quantile of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64, rule: QuantileRule) -> f64 {
    debug_assert!(!sorted.is_empty());
    match rule {
        QuantileRule::Linear => {
            let n = sorted.len();
            if n == 1 {
                return sorted[0];
            }
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = h - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        }
    }
}

/// Quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64, rule: QuantileRule) -> Result<f64> {
    if values.is_empty() {
        return Err(CoreError::Empty("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(CoreError::InvalidInput(format!("quantile level {q} outside [0,1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&v, q, rule))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (denominator n - 1).
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn sample_sd(x: &[f64]) -> f64 {
    sample_variance(x).sqrt()
}

/// Sample autocorrelation at lags `1..=max_lag` (biased, 1/n estimator).
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    (1..=max_lag)
        .map(|k| {
            if k >= n || c0 == 0.0 {
                return 0.0;
            }
            let ck: f64 = (k..n).map(|t| (x[t] - m) * (x[t - k] - m)).sum();
            ck / c0
        })
        .collect()
}

pub(crate) fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(CoreError::NonFinite(i)),
        None => Ok(()),
    }
}
