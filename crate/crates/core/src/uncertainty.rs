//! Pointwise uncertainty bands for the national curves.
//!
//! Method-2 curves get a direct percentile interval from the spread of plant
//! rates on each day. Method-1 curves get a residual bootstrap: fit an ARMA
//! model, resample its centred residuals with replacement, add them to the
//! fitted values and take per-day percentiles across replicates.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{daily_quantiles, NationalCurve};
use crate::arma::{arma_residuals, fit_arma_css, ArimaOrder, ArmaModel};
use crate::error::{CoreError, Result};
use crate::excretion::ExcretorsPanel;
use crate::series::{DailySeries, GappedSeries};
use crate::stats::{quantile_sorted, QuantileRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    pub order: ArimaOrder,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replications: 1000,
            alpha: 0.05,
            seed: 0,
            order: ArimaOrder::new(1, 0, 3),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 100 {
            return Err(CoreError::InvalidInput(format!(
                "at least 100 bootstrap replications required, got {}",
                self.replications
            )));
        }
        check_alpha(self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoreError::InvalidInput(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// Per-day `(α/2, 1 − α/2)` percentile band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileInterval {
    pub lower: GappedSeries,
    pub upper: GappedSeries,
    pub level: f64,
}

/// Percentiles of plant per-capita rates on each day; days with fewer than
/// two plants are missing.
pub fn method2_pointwise_interval(panel: &ExcretorsPanel, alpha: f64) -> Result<PercentileInterval> {
    check_alpha(alpha)?;
    let (mut qs, _) = daily_quantiles(panel, &[alpha / 2.0, 1.0 - alpha / 2.0], QuantileRule::Linear, 2);
    let mut upper = qs.pop().unwrap();
    let mut lower = qs.pop().unwrap();
    lower.label = "lower".into();
    upper.label = "upper".into();
    Ok(PercentileInterval {
        lower,
        upper,
        level: 1.0 - alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub lower: DailySeries,
    pub fitted: DailySeries,
    pub upper: DailySeries,
    pub level: f64,
    pub model: ArmaModel,
}

impl BootstrapInterval {
    /// `date,lower,fitted,upper`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e: csv::Error| CoreError::io("<interval csv>", e);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "lower", "fitted", "upper"]).map_err(io)?;
        for i in 0..self.fitted.len() {
            w.write_record([
                self.fitted.date_at(i).to_string(),
                self.lower.values[i].to_string(),
                self.fitted.values[i].to_string(),
                self.upper.values[i].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| CoreError::io("<interval csv>", e))
    }
}

/// Residual bootstrap around an already fitted model. Replicate `b` draws
/// from its own ChaCha stream, so the result is independent of thread
/// scheduling.
pub fn bootstrap_from_fit(fitted: &[f64], residuals: &[f64], cfg: &BootstrapConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    if residuals.is_empty() || fitted.is_empty() {
        return Err(CoreError::Empty("bootstrap needs residuals and fitted values".into()));
    }
    let m = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let pool: Vec<f64> = residuals.iter().map(|r| r - m).collect();
    let t_len = fitted.len();
    let b = cfg.replications;

    // replicates[b][t]
    let replicates: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(rep as u64);
            fitted
                .iter()
                .map(|f| f + pool[rng.random_range(0..pool.len())])
                .collect()
        })
        .collect();

    let (lo_q, hi_q) = (cfg.alpha / 2.0, 1.0 - cfg.alpha / 2.0);
    let bounds: Vec<(f64, f64)> = (0..t_len)
        .into_par_iter()
        .map(|t| {
            let mut col: Vec<f64> = replicates.iter().map(|r| r[t]).collect();
            col.sort_by(f64::total_cmp);
            (
                quantile_sorted(&col, lo_q, QuantileRule::Linear),
                quantile_sorted(&col, hi_q, QuantileRule::Linear),
            )
        })
        .collect();
    Ok(bounds.into_iter().unzip())
}

/// Bootstrap percentile band for a curve. Leading and trailing missing days
/// are dropped; interior gaps are an error.
pub fn bootstrap_percentile_ci(curve: &NationalCurve, cfg: &BootstrapConfig) -> Result<BootstrapInterval> {
    let dense = curve.series.to_dense()?;
    bootstrap_series_ci(&dense, cfg)
}

pub fn bootstrap_series_ci(series: &DailySeries, cfg: &BootstrapConfig) -> Result<BootstrapInterval> {
    cfg.validate()?;
    let y = &series.values;
    let model = fit_arma_css(y, cfg.order.p, cfg.order.d, cfg.order.q)?;
    let res = arma_residuals(&model, y)?;
    let fitted = res.fitted(y);
    let (lower, upper) = bootstrap_from_fit(&fitted, res.effective(), cfg)?;
    Ok(BootstrapInterval {
        lower: DailySeries::new(series.start, lower, "lower")?,
        fitted: DailySeries::new(series.start, fitted, "fitted")?,
        upper: DailySeries::new(series.start, upper, "upper")?,
        level: 1.0 - cfg.alpha,
        model,
    })
}
