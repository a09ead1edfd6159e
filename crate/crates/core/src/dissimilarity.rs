//! Dissimilarities between two equally long, fully observed series.
//!
//! * `L2`: Euclidean distance;
//! * `C1 = 2 (1 − r)` with `r` the Pearson correlation;
//! * `C2 = √((1 − r) / Σ_{k=1..K} CC_k)` with `CC_k` the lag-`k` cross-correlation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    L2,
    Corr,
    CrossCorr,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::L2, Measure::Corr, Measure::CrossCorr];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::L2 => "l2",
            Measure::Corr => "corr",
            Measure::CrossCorr => "crosscorr",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2" | "euclidean" => Ok(Measure::L2),
            "corr" | "c1" | "correlation" => Ok(Measure::Corr),
            "crosscorr" | "c2" | "cross-correlation" | "ccf" => Ok(Measure::CrossCorr),
            other => Err(CoreError::InvalidInput(format!("unknown measure `{other}`"))),
        }
    }
}

/// Lag horizon for the cross-correlation measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DissimilarityConfig {
    /// `None` selects `⌊10 · log₁₀ N⌋`, clipped to `N − 1`.
    pub max_lag: Option<usize>,
}

impl DissimilarityConfig {
    pub fn with_max_lag(max_lag: usize) -> Self {
        DissimilarityConfig { max_lag: Some(max_lag) }
    }

    pub fn resolve_lag(&self, n: usize) -> Result<usize> {
        let k = match self.max_lag {
            Some(k) => k,
            None => ((10.0 * (n as f64).log10()).floor() as usize).min(n.saturating_sub(1)),
        };
        if k < 1 || k >= n {
            return Err(CoreError::InvalidInput(format!(
                "max lag {k} must satisfy 1 <= K < N = {n}"
            )));
        }
        Ok(k)
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(CoreError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(CoreError::Empty("dissimilarity of empty series".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(CoreError::MissingValues);
    }
    Ok(())
}

pub fn l2_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

fn centered(x: &[f64]) -> (Vec<f64>, f64) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let ss = c.iter().map(|v| v * v).sum::<f64>();
    (c, ss)
}

/// Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (cx, sx) = centered(x);
    let (cy, sy) = centered(y);
    if sx == 0.0 || sy == 0.0 {
        return Err(CoreError::ConstantSeries("correlation"));
    }
    let sxy: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    Ok((sxy / (sx * sy).sqrt()).clamp(-1.0, 1.0))
}

/// Sample cross-correlation of `x` against `y` at lags `1..=max_lag`:
/// `CC_k = Σ_{t} (x_{t+k} − x̄)(y_t − ȳ) / (N · s_x · s_y)`, with the
/// standard deviations using denominator `N`.
pub fn cross_correlations(x: &[f64], y: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    check_pair(x, y)?;
    let n = x.len();
    let (cx, sx) = centered(x);
    let (cy, sy) = centered(y);
    if sx == 0.0 || sy == 0.0 {
        return Err(CoreError::ConstantSeries("cross-correlation"));
    }
    let denom = (sx * sy).sqrt();
    Ok((1..=max_lag)
        .map(|k| {
            if k >= n {
                return 0.0;
            }
            cx[k..].iter().zip(&cy[..n - k]).map(|(a, b)| a * b).sum::<f64>() / denom
        })
        .collect())
}

pub fn corr_dissimilarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() < 3 {
        return Err(CoreError::InvalidInput(
            "correlation dissimilarity needs at least 3 points".into(),
        ));
    }
    Ok(2.0 * (1.0 - pearson(x, y)?))
}

pub fn crosscorr_dissimilarity(x: &[f64], y: &[f64], cfg: &DissimilarityConfig) -> Result<f64> {
    check_pair(x, y)?;
    let k = cfg.resolve_lag(x.len())?;
    let r = pearson(x, y)?;
    let denom: f64 = cross_correlations(x, y, k)?.iter().sum();
    if denom <= 0.0 {
        return Err(CoreError::NonPositiveDenominator(denom));
    }
    Ok(((1.0 - r).max(0.0) / denom).sqrt())
}

pub fn dissimilarity(measure: Measure, x: &[f64], y: &[f64], cfg: &DissimilarityConfig) -> Result<f64> {
    match measure {
        Measure::L2 => l2_distance(x, y),
        Measure::Corr => corr_dissimilarity(x, y),
        Measure::CrossCorr => crosscorr_dissimilarity(x, y, cfg),
    }
}
