//! National indicator curves from the per-plant panel.
//!
//! * method 1, ratio of sums: `10⁵ · Σ E / Σ R` over plants observed that day;
//! * method 2, a per-day quantile (median by default) of per-capita rates.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::excretion::{ExcretorsPanel, PER_CAPITA_SCALE};
use crate::series::GappedSeries;
use crate::stats::{quantile_sorted, QuantileRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Method1,
    Method2,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Method1 => "method1",
            Method::Method2 => "method2",
        })
    }
}

impl FromStr for Method {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "method1" | "method-1" | "m1" => Ok(Method::Method1),
            "2" | "method2" | "method-2" | "m2" => Ok(Method::Method2),
            other => Err(CoreError::InvalidInput(format!("unknown aggregation method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub method: Method,
    pub quantile_level: f64,
    pub quantile_rule: QuantileRule,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            method: Method::Method1,
            quantile_level: 0.5,
            quantile_rule: QuantileRule::Linear,
        }
    }
}

impl AggregationConfig {
    pub fn method1() -> Self {
        AggregationConfig::default()
    }

    pub fn method2(quantile_level: f64) -> Result<Self> {
        let cfg = AggregationConfig {
            method: Method::Method2,
            quantile_level,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quantile_level > 0.0 && self.quantile_level < 1.0) {
            return Err(CoreError::InvalidInput(format!(
                "quantile level must lie in (0,1), got {}",
                self.quantile_level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NationalCurve {
    pub series: GappedSeries,
    pub method: Method,
    /// Quantile level and rule, method 2 only.
    pub quantile: Option<(f64, QuantileRule)>,
    pub n_plants_per_day: Vec<usize>,
}

impl NationalCurve {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// `date,value,n_plants`; missing days have an empty value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e: csv::Error| CoreError::io("<curve csv>", e);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "value", "n_plants"]).map_err(io)?;
        for (i, v) in self.series.values.iter().enumerate() {
            w.write_record([
                self.series.date_at(i).to_string(),
                v.map(|x| x.to_string()).unwrap_or_default(),
                self.n_plants_per_day[i].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| CoreError::io("<curve csv>", e))
    }
}

pub fn aggregate(panel: &ExcretorsPanel, cfg: &AggregationConfig) -> Result<NationalCurve> {
    match cfg.method {
        Method::Method1 => aggregate_method1(panel),
        Method::Method2 => aggregate_method2(panel, cfg),
    }
}

pub fn aggregate_method1(panel: &ExcretorsPanel) -> Result<NationalCurve> {
    if panel.n_plants() == 0 {
        return Err(CoreError::Empty("panel has no plants".into()));
    }
    let mut series = GappedSeries::missing(panel.start, panel.len, "method1");
    let mut counts = vec![0; panel.len];
    for (i, slot) in series.values.iter_mut().enumerate() {
        let (mut e_sum, mut r_sum, mut n) = (0.0, 0u64, 0usize);
        for (_, e, r, _) in panel.day(i) {
            e_sum += e;
            r_sum += r;
            n += 1;
        }
        counts[i] = n;
        if n > 0 {
            *slot = Some(PER_CAPITA_SCALE * e_sum / r_sum as f64);
        }
    }
    Ok(NationalCurve {
        series,
        method: Method::Method1,
        quantile: None,
        n_plants_per_day: counts,
    })
}

/// Per-day quantile of per-capita rates; `min_plants` gates which days
/// are emitted.
pub(crate) fn daily_quantiles(
    panel: &ExcretorsPanel,
    levels: &[f64],
    rule: QuantileRule,
    min_plants: usize,
) -> (Vec<GappedSeries>, Vec<usize>) {
    let mut out: Vec<GappedSeries> = levels
        .iter()
        .map(|q| GappedSeries::missing(panel.start, panel.len, format!("q{q}")))
        .collect();
    let mut counts = Vec::with_capacity(panel.len);
    for i in 0..panel.len {
        let mut rates = panel.rates_on(i);
        counts.push(rates.len());
        if rates.len() < min_plants.max(1) {
            continue;
        }
        rates.sort_by(f64::total_cmp);
        for (s, &q) in out.iter_mut().zip(levels) {
            s.values[i] = Some(quantile_sorted(&rates, q, rule));
        }
    }
    (out, counts)
}

pub fn aggregate_method2(panel: &ExcretorsPanel, cfg: &AggregationConfig) -> Result<NationalCurve> {
    cfg.validate()?;
    if panel.n_plants() == 0 {
        return Err(CoreError::Empty("panel has no plants".into()));
    }
    let (mut qs, counts) = daily_quantiles(panel, &[cfg.quantile_level], cfg.quantile_rule, 1);
    let mut series = qs.pop().unwrap();
    series.label = "method2".into();
    Ok(NationalCurve {
        series,
        method: Method::Method2,
        quantile: Some((cfg.quantile_level, cfg.quantile_rule)),
        n_plants_per_day: counts,
    })
}

/// Divide by the curve maximum so the peak is exactly one.
pub fn normalize_curve(curve: &NationalCurve) -> Result<NationalCurve> {
    let max = curve
        .series
        .values
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return Err(CoreError::InvalidInput(
            "cannot normalise a curve without a positive maximum".into(),
        ));
    }
    let mut out = curve.clone();
    for v in out.series.values.iter_mut().flatten() {
        *v /= max;
    }
    Ok(out)
}

/// Daily 0.25 and 0.75 quantiles of per-capita rates.
pub fn iqr_band(panel: &ExcretorsPanel, rule: QuantileRule) -> (GappedSeries, GappedSeries) {
    let (mut qs, _) = daily_quantiles(panel, &[0.25, 0.75], rule, 1);
    let upper = qs.pop().unwrap();
    let lower = qs.pop().unwrap();
    (lower, upper)
}
