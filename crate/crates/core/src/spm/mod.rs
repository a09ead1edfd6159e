//! Statistical process monitoring of the national curve.
//!
//! Each chart consumes a series one point at a time and emits a
//! [`ChartRun`]: per point the chart statistic, its control limits and
//! whether the point signals.

mod arl;
mod cusum;
mod pcc;
mod shewhart;

use std::io::Write;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::stats::{mean, sample_sd};

pub use arl::{monte_carlo_arl, ArlEstimate};
pub use cusum::{alpha_for_arl, calibrate_pcc_alpha, cusum_run, siegmund_arl, CusumConfig};
pub use pcc::{pcc_run, predictive_interval, NigPrior, PccConfig, PccState};
pub use shewhart::{residual_shewhart_run, shewhart_run, ResidualChart, ShewhartConfig};

/// How a statistic is compared against its limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Signal only when the statistic lies strictly beyond the limit.
    #[default]
    Strict,
    /// Signal when the statistic reaches the limit.
    Inclusive,
}

impl Comparison {
    pub fn above(self, stat: f64, limit: f64) -> bool {
        match self {
            Comparison::Strict => stat > limit,
            Comparison::Inclusive => stat >= limit,
        }
    }

    pub fn below(self, stat: f64, limit: f64) -> bool {
        match self {
            Comparison::Strict => stat < limit,
            Comparison::Inclusive => stat <= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartRecord {
    pub index: usize,
    pub value: f64,
    pub statistic: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub signal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartRun {
    pub chart: String,
    pub start_date: Option<NaiveDate>,
    pub records: Vec<ChartRecord>,
    pub first_alarm_index: Option<usize>,
}

impl ChartRun {
    pub(crate) fn new(chart: &str, records: Vec<ChartRecord>) -> Self {
        let first_alarm_index = records.iter().position(|r| r.signal);
        ChartRun {
            chart: chart.to_string(),
            start_date: None,
            records,
            first_alarm_index,
        }
    }

    pub fn with_start(mut self, start: NaiveDate) -> Self {
        self.start_date = Some(start);
        self
    }

    pub fn n_alarms(&self) -> usize {
        self.records.iter().filter(|r| r.signal).count()
    }

    pub fn alarm_indices(&self) -> Vec<usize> {
        self.records.iter().filter(|r| r.signal).map(|r| r.index).collect()
    }

    pub fn statistics(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.statistic).collect()
    }

    pub fn date_at(&self, index: usize) -> Option<NaiveDate> {
        self.start_date.map(|d| d + Duration::days(index as i64))
    }

    /// `index,date,value,statistic,lower,upper,signal`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e: csv::Error| CoreError::io("<chart csv>", e);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "date", "value", "statistic", "lower", "upper", "signal"])
            .map_err(io)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.index.to_string(),
                self.date_at(r.index).map(|d| d.to_string()).unwrap_or_default(),
                r.value.to_string(),
                r.statistic.to_string(),
                opt(r.lower),
                opt(r.upper),
                r.signal.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| CoreError::io("<chart csv>", e))
    }
}

/// In-control mean and standard deviation from a phase-I span.
pub fn phase1_estimates(x: &[f64]) -> Result<(f64, f64)> {
    crate::stats::check_finite(x)?;
    if x.len() < 2 {
        return Err(CoreError::ChartConfig("phase-I span needs at least two points".into()));
    }
    let sd = sample_sd(x);
    if !(sd > 0.0) {
        return Err(CoreError::ChartConfig("phase-I span has zero variance".into()));
    }
    Ok((mean(x), sd))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_run_round_trips_through_json() {
        let run = cusum_run(&[0.0, 2.0, 3.0, -1.0], &CusumConfig::new(0.0, 1.0).unwrap())
            .unwrap()
            .with_start("2023-07-20".parse().unwrap());
        let json = serde_json::to_string(&run).unwrap();
        let back: ChartRun = serde_json::from_str(&json).unwrap();
        assert_eq!(run, back);
        let mut buf = Vec::new();
        run.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("0,2023-07-20,0,0,,4.5,false"));
    }

    #[test]
    fn phase1_guards() {
        assert!(phase1_estimates(&[1.0]).is_err());
        assert!(phase1_estimates(&[2.0, 2.0]).is_err());
        let (m, s) = phase1_estimates(&[1.0, 3.0]).unwrap();
        assert_eq!((m, s), (2.0, 2f64.sqrt()));
    }
}
