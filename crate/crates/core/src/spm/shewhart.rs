use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{phase1_estimates, ChartRecord, ChartRun, Comparison};
use crate::arma::{arma_residuals, fit_arma_css, ArimaOrder, ArmaModel};
use crate::error::{CoreError, Result};

/// Individuals chart with limits `μ ± Lσ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShewhartConfig {
    pub mu: f64,
    pub sigma: f64,
    pub l: f64,
    pub comparison: Comparison,
}

impl ShewhartConfig {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        let cfg = ShewhartConfig {
            mu,
            sigma,
            l: 3.0,
            comparison: Comparison::Strict,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_phase1(x: &[f64]) -> Result<Self> {
        let (m, s) = phase1_estimates(x)?;
        ShewhartConfig::new(m, s)
    }

    pub fn with_l(mut self, l: f64) -> Result<Self> {
        self.l = l;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.sigma > 0.0 && self.sigma.is_finite() && self.l > 0.0 && self.l.is_finite()) {
            return Err(CoreError::ChartConfig(format!(
                "Shewhart chart needs finite mu and positive sigma, L (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn limits(&self) -> (f64, f64) {
        (self.mu - self.l * self.sigma, self.mu + self.l * self.sigma)
    }
}

pub fn shewhart_run(x: &[f64], cfg: &ShewhartConfig) -> Result<ChartRun> {
    cfg.validate()?;
    Ok(ChartRun::new("shewhart", shewhart_records(x, cfg, 0)?))
}

fn shewhart_records(x: &[f64], cfg: &ShewhartConfig, offset: usize) -> Result<Vec<ChartRecord>> {
    let (lo, hi) = cfg.limits();
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if !v.is_finite() {
                return Err(CoreError::NonFinite(i + offset));
            }
            Ok(ChartRecord {
                index: i + offset,
                value: v,
                statistic: v,
                lower: Some(lo),
                upper: Some(hi),
                signal: cfg.comparison.below(v, lo) || cfg.comparison.above(v, hi),
            })
        })
        .collect()
}

/// Shewhart chart on the one-step residuals of an ARIMA model fitted to a
/// phase-I span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualChart {
    pub model: ArmaModel,
    /// Residuals aligned with the input; the leading `burn_in` entries
    /// carry no prediction and are not charted.
    pub residuals: Vec<f64>,
    pub burn_in: usize,
    pub run: ChartRun,
}

pub fn residual_shewhart_run(x: &[f64], order: ArimaOrder, phase1: Range<usize>, l: f64) -> Result<ResidualChart> {
    if phase1.start >= phase1.end || phase1.end > x.len() {
        return Err(CoreError::ChartConfig(format!(
            "phase-I span {}..{} does not lie inside a series of length {}",
            phase1.start,
            phase1.end,
            x.len()
        )));
    }
    let model = fit_arma_css(&x[phase1], order.p, order.d, order.q)?;
    let res = arma_residuals(&model, x)?;
    let cfg = ShewhartConfig::new(0.0, model.innovation_sd)?.with_l(l)?;
    let records = shewhart_records(res.effective(), &cfg, res.burn_in)?;
    Ok(ResidualChart {
        model,
        residuals: res.values,
        burn_in: res.burn_in,
        run: ChartRun::new("residual_shewhart", records),
    })
}
