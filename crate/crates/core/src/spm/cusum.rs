use serde::{Deserialize, Serialize};

use super::{phase1_estimates, ChartRecord, ChartRun, Comparison};
use crate::error::{CoreError, Result};

/// Upper one-sided CUSUM: `C_i = max(0, x_i − (μ₀ + kσ) + C_{i−1})`,
/// signalling when `C_i` passes `hσ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CusumConfig {
    pub mu0: f64,
    pub sigma: f64,
    pub k: f64,
    pub h: f64,
    /// Restart the statistic at zero after each signal.
    pub reset_on_signal: bool,
    pub comparison: Comparison,
}

impl CusumConfig {
    /// Defaults `k = 1/2`, `h = 4.5`.
    pub fn new(mu0: f64, sigma: f64) -> Result<Self> {
        let cfg = CusumConfig {
            mu0,
            sigma,
            k: 0.5,
            h: 4.5,
            reset_on_signal: false,
            comparison: Comparison::Strict,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_phase1(x: &[f64]) -> Result<Self> {
        let (m, s) = phase1_estimates(x)?;
        CusumConfig::new(m, s)
    }

    pub fn with_kh(mut self, k: f64, h: f64) -> Result<Self> {
        self.k = k;
        self.h = h;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !self.mu0.is_finite() || !ok(self.sigma) || !ok(self.k) || !ok(self.h) {
            return Err(CoreError::ChartConfig(format!(
                "CUSUM needs finite mu0 and positive sigma, k, h (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn reference(&self) -> f64 {
        self.k * self.sigma
    }

    pub fn decision_interval(&self) -> f64 {
        self.h * self.sigma
    }
}

pub fn cusum_run(x: &[f64], cfg: &CusumConfig) -> Result<ChartRun> {
    cfg.validate()?;
    let big_k = cfg.reference();
    let big_h = cfg.decision_interval();
    let mut c = 0.0;
    let mut records = Vec::with_capacity(x.len());
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(CoreError::NonFinite(i));
        }
        c = f64::max(0.0, v - (cfg.mu0 + big_k) + c);
        let signal = cfg.comparison.above(c, big_h);
        records.push(ChartRecord {
            index: i,
            value: v,
            statistic: c,
            lower: None,
            upper: Some(big_h),
            signal,
        });
        if signal && cfg.reset_on_signal {
            c = 0.0;
        }
    }
    Ok(ChartRun::new("cusum", records))
}

/// Siegmund's approximation to the average run length of the one-sided
/// CUSUM for a mean shift of `delta` standard deviations:
/// `ARL = (e^{−2Δb} + 2Δb − 1) / (2Δ²)`, `Δ = δ − k`, `b = h + 1.166`,
/// with the limit `b²` at `Δ = 0`.
pub fn siegmund_arl(k: f64, h: f64, delta: f64) -> Result<f64> {
    if !(k > 0.0 && h > 0.0 && k.is_finite() && h.is_finite() && delta.is_finite()) {
        return Err(CoreError::ChartConfig(format!(
            "Siegmund ARL needs positive k, h and finite delta (k={k}, h={h}, delta={delta})"
        )));
    }
    let d = delta - k;
    let b = h + 1.166;
    let x = 2.0 * d * b;
    // ARL = b² · g(x) with g(x) = 2(e^{−x} + x − 1)/x²
    let g = if x.abs() < 1e-2 {
        1.0 - x / 3.0 + x * x / 12.0 - x.powi(3) / 60.0 + x.powi(4) / 360.0 - x.powi(5) / 2520.0
    } else {
        2.0 * ((-x).exp() + x - 1.0) / (x * x)
    };
    Ok(b * b * g)
}

/// Per-point false-alarm probability whose geometric run length matches
/// `arl0`.
pub fn alpha_for_arl(arl0: f64) -> Result<f64> {
    if !(arl0.is_finite() && arl0 > 1.0) {
        return Err(CoreError::ChartConfig(format!(
            "in-control ARL must be finite and > 1, got {arl0}"
        )));
    }
    Ok(1.0 / arl0)
}

/// False-alarm rate for the predictive chart that matches the CUSUM's
/// in-control ARL.
pub fn calibrate_pcc_alpha(cfg: &CusumConfig) -> Result<f64> {
    alpha_for_arl(siegmund_arl(cfg.k, cfg.h, 0.0)?)
}
