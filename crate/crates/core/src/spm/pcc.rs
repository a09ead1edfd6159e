//! Bayesian predictive control chart.
//!
//! Observations are modelled as iid `N(μ, σ²)` with a Normal–Inverse-Gamma
//! prior `μ | σ² ~ N(m, σ²/κ)`, `σ² ~ IG(a, b)`. The one-step posterior
//! predictive is Student-t with `2a` degrees of freedom, location `m` and
//! squared scale `b(κ + 1)/(aκ)`; being symmetric and unimodal, its HPD
//! region is the equal-tailed interval. A point outside the interval raises
//! an alarm and is left out of the posterior.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{ChartRecord, ChartRun, Comparison};
use crate::error::{CoreError, Result};
use crate::stats::{mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigPrior {
    pub location: f64,
    /// κ: prior sample size behind `location`.
    pub precision_weight: f64,
    pub shape: f64,
    pub scale: f64,
}

impl NigPrior {
    pub fn new(location: f64, precision_weight: f64, shape: f64, scale: f64) -> Result<Self> {
        let p = NigPrior {
            location,
            precision_weight,
            shape,
            scale,
        };
        p.validate()?;
        Ok(p)
    }

    /// Moment-matched prior: location = mean, shape 2 (finite variance
    /// with the prior mean of σ² equal to the sample variance), κ = length.
    pub fn from_historical(x: &[f64]) -> Result<Self> {
        crate::stats::check_finite(x)?;
        if x.len() < 2 {
            return Err(CoreError::ChartConfig(
                "historical span needs at least two points".into(),
            ));
        }
        let var = sample_variance(x);
        if !(var > 0.0) {
            return Err(CoreError::ChartConfig(
                "historical span has zero variance; posterior would be degenerate".into(),
            ));
        }
        let shape = 2.0;
        NigPrior::new(mean(x), x.len() as f64, shape, var * (shape - 1.0))
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !self.location.is_finite() || !pos(self.precision_weight) || !pos(self.shape) || !pos(self.scale) {
            return Err(CoreError::ChartConfig(format!(
                "Normal-Inverse-Gamma prior needs finite location and positive κ, a, b (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PccConfig {
    pub prior: NigPrior,
    pub alpha: f64,
    /// Leading points absorbed into the posterior without being tested.
    pub warmup: usize,
    pub comparison: Comparison,
}

impl PccConfig {
    /// Two warm-up points, as a vague prior needs some data first.
    pub fn new(prior: NigPrior, alpha: f64) -> Result<Self> {
        let cfg = PccConfig {
            prior,
            alpha,
            warmup: 2,
            comparison: Comparison::Strict,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Prior from an in-control historical span, which already supplies
    /// the warm-up information.
    pub fn from_historical(historical: &[f64], alpha: f64) -> Result<Self> {
        let cfg = PccConfig {
            prior: NigPrior::from_historical(historical)?,
            alpha,
            warmup: 0,
            comparison: Comparison::Strict,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CoreError::ChartConfig(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Posterior state of the chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PccState {
    pub m: f64,
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
}

impl PccState {
    pub fn from_prior(p: &NigPrior) -> Self {
        PccState {
            m: p.location,
            kappa: p.precision_weight,
            a: p.shape,
            b: p.scale,
        }
    }

    pub fn update(&mut self, x: f64) {
        let k1 = self.kappa + 1.0;
        self.b += self.kappa * (x - self.m).powi(2) / (2.0 * k1);
        self.m = (self.kappa * self.m + x) / k1;
        self.kappa = k1;
        self.a += 0.5;
    }

    pub fn predictive_dof(&self) -> f64 {
        2.0 * self.a
    }

    pub fn predictive_scale(&self) -> f64 {
        (self.b * (self.kappa + 1.0) / (self.a * self.kappa)).sqrt()
    }

    pub fn predictive(&self) -> StudentsT {
        StudentsT::new(self.m, self.predictive_scale(), self.predictive_dof())
            .expect("validated posterior has positive scale and dof")
    }
}

/// `100(1 − α)%` HPD interval of the one-step predictive.
pub fn predictive_interval(state: &PccState, alpha: f64) -> (f64, f64) {
    let t = StudentsT::new(0.0, 1.0, state.predictive_dof())
        .expect("positive dof")
        .inverse_cdf(1.0 - alpha / 2.0);
    let half = t * state.predictive_scale();
    (state.m - half, state.m + half)
}

pub fn pcc_run(x: &[f64], cfg: &PccConfig) -> Result<ChartRun> {
    cfg.validate()?;
    let mut state = PccState::from_prior(&cfg.prior);
    let mut records = Vec::with_capacity(x.len());
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(CoreError::NonFinite(i));
        }
        if i < cfg.warmup {
            state.update(v);
            records.push(ChartRecord {
                index: i,
                value: v,
                statistic: v,
                lower: None,
                upper: None,
                signal: false,
            });
            continue;
        }
        let (lo, hi) = predictive_interval(&state, cfg.alpha);
        let signal = cfg.comparison.below(v, lo) || cfg.comparison.above(v, hi);
        records.push(ChartRecord {
            index: i,
            value: v,
            statistic: v,
            lower: Some(lo),
            upper: Some(hi),
            signal,
        });
        if !signal {
            state.update(v);
        }
    }
    Ok(ChartRun::new("pcc", records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn prior() -> NigPrior {
        NigPrior::new(0.0, 1.0, 2.0, 1.0).unwrap()
    }

    /// Brute-force posterior from the full data with the textbook
    /// batch formulas.
    fn batch_posterior(p: &NigPrior, xs: &[f64]) -> PccState {
        let n = xs.len() as f64;
        let xbar = xs.iter().sum::<f64>() / n;
        let ss: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
        let kappa = p.precision_weight + n;
        PccState {
            m: (p.precision_weight * p.location + n * xbar) / kappa,
            kappa,
            a: p.shape + n / 2.0,
            b: p.scale + 0.5 * ss + p.precision_weight * n * (xbar - p.location).powi(2) / (2.0 * kappa),
        }
    }

    #[test]
    fn sequential_update_matches_batch() {
        let xs = [0.3, -1.2, 2.5, 0.7, 0.1];
        let mut s = PccState::from_prior(&prior());
        xs.iter().for_each(|&x| s.update(x));
        let b = batch_posterior(&prior(), &xs);
        for (u, v) in [(s.m, b.m), (s.kappa, b.kappa), (s.a, b.a), (s.b, b.b)] {
            assert!((u - v).abs() < 1e-12, "{s:?} vs {b:?}");
        }
    }

    #[test]
    fn interval_is_equal_tailed_and_hpd() {
        let s = PccState {
            m: 1.0,
            kappa: 3.0,
            a: 2.5,
            b: 4.0,
        };
        let (lo, hi) = predictive_interval(&s, 0.05);
        let t = s.predictive();
        assert!((t.cdf(lo) - 0.025).abs() < 1e-9);
        assert!((t.cdf(hi) - 0.975).abs() < 1e-9);
        assert!((hi - s.m - (s.m - lo)).abs() < 1e-9);
        // shifting the interval while keeping its mass lengthens it
        let shifted = (t.inverse_cdf(0.03), t.inverse_cdf(0.98));
        assert!(shifted.1 - shifted.0 > hi - lo);
    }

    #[test]
    fn warmup_is_not_tested_and_shift_alarms_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x: Vec<f64> = (0..40).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let cfg = PccConfig::new(prior(), 0.01).unwrap();
        let stable = pcc_run(&x, &cfg).unwrap();
        assert!(stable.records[..2].iter().all(|r| r.lower.is_none() && !r.signal));
        // shift by five predictive scales
        let mut s = PccState::from_prior(&prior());
        x.iter().for_each(|&v| s.update(v));
        let jump = s.m + 5.0 * s.predictive_scale();
        x.push(jump);
        let run = pcc_run(&x, &cfg).unwrap();
        if stable.n_alarms() == 0 {
            assert_eq!(run.first_alarm_index, Some(40));
        } else {
            assert!(run.records[40].signal);
        }
    }

    #[test]
    fn alarmed_points_do_not_update() {
        let cfg = PccConfig::new(prior(), 0.01).unwrap();
        let run = pcc_run(&[0.1, -0.1, 0.05, 1000.0, 0.0], &cfg).unwrap();
        assert_eq!(run.alarm_indices(), vec![3]);
        let before = (run.records[3].lower, run.records[3].upper);
        let mut s = PccState::from_prior(&prior());
        [0.1, -0.1, 0.05].iter().for_each(|&v| s.update(v));
        let expect = predictive_interval(&s, 0.01);
        assert_eq!(before, (Some(expect.0), Some(expect.1)));
        let (lo, hi) = predictive_interval(&s, 0.01);
        assert_eq!((run.records[4].lower, run.records[4].upper), (Some(lo), Some(hi)));
    }

    #[test]
    fn width_shrinks_with_consistent_data() {
        let mut s = PccState::from_prior(&prior());
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let (lo, hi) = predictive_interval(&s, 0.01);
            assert!(hi - lo <= last + 1e-12);
            last = hi - lo;
            s.update(s.m);
        }
    }

    #[test]
    fn degenerate_history_rejected() {
        assert!(matches!(
            NigPrior::from_historical(&[3.0, 3.0, 3.0]),
            Err(CoreError::ChartConfig(_))
        ));
        assert!(NigPrior::from_historical(&[3.0]).is_err());
        assert!(NigPrior::new(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(PccConfig::new(prior(), 1.0).is_err());
        let p = NigPrior::from_historical(&[1.0, 3.0]).unwrap();
        assert_eq!((p.location, p.precision_weight, p.shape, p.scale), (2.0, 2.0, 2.0, 2.0));
    }

    /// Stream drawn point by point from the chart's own current
    /// predictive, so every tested point has exactly probability α of
    /// falling outside the interval.
    pub(crate) fn predictive_stream(cfg: &PccConfig, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = PccState::from_prior(&cfg.prior);
        (0..n)
            .map(|i| {
                let t = rand_distr::StudentT::new(s.predictive_dof()).unwrap();
                let v = s.m + s.predictive_scale() * rng.sample::<f64, _>(t);
                let (lo, hi) = predictive_interval(&s, cfg.alpha);
                if i < cfg.warmup || (lo..=hi).contains(&v) {
                    s.update(v);
                }
                v
            })
            .collect()
    }

    #[test]
    fn matched_stream_alarm_rate_near_alpha() {
        let alpha = 0.01;
        let cfg = PccConfig::new(prior(), alpha).unwrap();
        let x = predictive_stream(&cfg, 100_000, 9);
        let tested = (x.len() - cfg.warmup) as f64;
        let rate = pcc_run(&x, &cfg).unwrap().n_alarms() as f64 / tested;
        let se = (alpha * (1.0 - alpha) / tested).sqrt();
        assert!((rate - alpha).abs() < 4.0 * se, "rate {rate}");
    }
}
