//! Negative-binomial INGARCH model for the rounded national curve.
//!
//! `λ_t = β₀ + Σ_i a_i Y_{t−i} + Σ_j b_j λ_{t−j}` with identity link and
//! `Y_t | past ~ NegBin(mean λ_t, dispersion φ)`, so `Var = λ + λ²/φ`.
//! Regression parameters maximise the Poisson quasi log-likelihood; φ is
//! then matched to the Pearson statistic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::optim::Bfgs;

/// Dispersion reported when the data show no overdispersion.
pub const MAX_DISPERSION: f64 = 1e6;
/// Fits with a larger dispersion are flagged as practically Poisson.
pub const NEAR_POISSON_DISPERSION: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngarchSpec {
    pub obs_lags: Vec<usize>,
    pub mean_lags: Vec<usize>,
}

impl IngarchSpec {
    pub fn new(mut obs_lags: Vec<usize>, mut mean_lags: Vec<usize>) -> Result<Self> {
        for lags in [&mut obs_lags, &mut mean_lags] {
            lags.sort_unstable();
            let before = lags.len();
            lags.dedup();
            if lags.len() != before || lags.first() == Some(&0) {
                return Err(CoreError::InvalidInput(format!(
                    "INGARCH lags must be distinct positive integers, got {lags:?}"
                )));
            }
        }
        Ok(IngarchSpec { obs_lags, mean_lags })
    }

    /// Past count at lag 1, past means at lags 2, 3 and 4.
    pub fn weekly_default() -> Self {
        IngarchSpec {
            obs_lags: vec![1],
            mean_lags: vec![2, 3, 4],
        }
    }

    pub fn n_params(&self) -> usize {
        1 + self.obs_lags.len() + self.mean_lags.len()
    }

    fn max_lag(&self) -> usize {
        self.obs_lags.iter().chain(&self.mean_lags).copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngarchParams {
    pub intercept: f64,
    pub obs_coeffs: Vec<f64>,
    pub mean_coeffs: Vec<f64>,
}

impl IngarchParams {
    fn check(&self, spec: &IngarchSpec) -> Result<()> {
        if self.obs_coeffs.len() != spec.obs_lags.len() {
            return Err(CoreError::LengthMismatch(spec.obs_lags.len(), self.obs_coeffs.len()));
        }
        if self.mean_coeffs.len() != spec.mean_lags.len() {
            return Err(CoreError::LengthMismatch(spec.mean_lags.len(), self.mean_coeffs.len()));
        }
        Ok(())
    }

    /// One step of the recursion; `past_obs[i]` is the count at the i-th
    /// observation lag and `past_means[j]` the mean at the j-th mean lag.
    pub fn predict(&self, past_obs: &[f64], past_means: &[f64]) -> f64 {
        self.intercept
            + self.obs_coeffs.iter().zip(past_obs).map(|(a, y)| a * y).sum::<f64>()
            + self.mean_coeffs.iter().zip(past_means).map(|(b, l)| b * l).sum::<f64>()
    }

    pub fn persistence(&self) -> f64 {
        self.obs_coeffs.iter().chain(&self.mean_coeffs).sum()
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.intercept];
        v.extend(&self.obs_coeffs);
        v.extend(&self.mean_coeffs);
        v
    }

    fn from_slice(spec: &IngarchSpec, v: &[f64]) -> Self {
        let p = spec.obs_lags.len();
        IngarchParams {
            intercept: v[0],
            obs_coeffs: v[1..1 + p].to_vec(),
            mean_coeffs: v[1 + p..].to_vec(),
        }
    }
}

/// Conditional means for the observed series. Counts and means before the
/// start are set to the sample mean of `y`.
pub fn lambda_path(spec: &IngarchSpec, params: &IngarchParams, y: &[u64]) -> Result<Vec<f64>> {
    params.check(spec)?;
    if y.is_empty() {
        return Err(CoreError::Empty("count series".into()));
    }
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let ybar = yf.iter().sum::<f64>() / yf.len() as f64;
    lambda_path_f(spec, params, &yf, ybar)
}

fn lambda_path_f(spec: &IngarchSpec, params: &IngarchParams, y: &[f64], init: f64) -> Result<Vec<f64>> {
    let mut lambda: Vec<f64> = Vec::with_capacity(y.len());
    let mut obs = vec![0.0; spec.obs_lags.len()];
    let mut means = vec![0.0; spec.mean_lags.len()];
    for t in 0..y.len() {
        for (o, &l) in obs.iter_mut().zip(&spec.obs_lags) {
            *o = if t >= l { y[t - l] } else { init };
        }
        for (m, &l) in means.iter_mut().zip(&spec.mean_lags) {
            *m = if t >= l { lambda[t - l] } else { init };
        }
        let lam = params.predict(&obs, &means);
        if !(lam > 0.0) {
            return Err(CoreError::NonPositiveIntensity(t));
        }
        lambda.push(lam);
    }
    Ok(lambda)
}

fn poisson_quasi_loglik(y: &[f64], lambda: &[f64]) -> f64 {
    y.iter().zip(lambda).map(|(y, l)| y * l.ln() - l).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngarchFit {
    pub spec: IngarchSpec,
    pub params: IngarchParams,
    pub dispersion: f64,
    pub lambda_path: Vec<f64>,
    /// Poisson quasi log-likelihood without the `log y!` term.
    pub loglik: f64,
    pub near_poisson: bool,
    /// Constant input: no dynamics to estimate.
    pub degenerate: bool,
    pub iterations: usize,
}

/// Rounds a non-negative curve to counts.
pub fn round_to_counts(x: &[f64]) -> Result<Vec<u64>> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if !v.is_finite() || v < 0.0 {
                Err(CoreError::InvalidInput(format!(
                    "count series value {v} at index {i} is not a non-negative number"
                )))
            } else {
                Ok(v.round() as u64)
            }
        })
        .collect()
}

pub fn fit_ingarch_qcml(y: &[u64], spec: &IngarchSpec) -> Result<IngarchFit> {
    let m = spec.n_params();
    if y.len() < 10 * m || y.len() <= spec.max_lag() {
        return Err(CoreError::Fit(format!(
            "{} observations are too few for {m} INGARCH parameters (need {})",
            y.len(),
            10 * m
        )));
    }
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let ybar = yf.iter().sum::<f64>() / yf.len() as f64;

    if y.iter().all(|&v| v == y[0]) {
        if y[0] == 0 {
            return Err(CoreError::ConstantSeries("count series is identically zero"));
        }
        let params = IngarchParams {
            intercept: ybar,
            obs_coeffs: vec![0.0; spec.obs_lags.len()],
            mean_coeffs: vec![0.0; spec.mean_lags.len()],
        };
        let lambda = vec![ybar; y.len()];
        return Ok(IngarchFit {
            spec: spec.clone(),
            loglik: poisson_quasi_loglik(&yf, &lambda),
            params,
            dispersion: MAX_DISPERSION,
            lambda_path: lambda,
            near_poisson: true,
            degenerate: true,
            iterations: 0,
        });
    }

    let start = moment_start(spec, ybar);
    let n = yf.len() as f64;
    let objective = |v: &[f64]| -> f64 {
        let p = IngarchParams::from_slice(spec, v);
        match lambda_path_f(spec, &p, &yf, ybar) {
            Ok(l) => -poisson_quasi_loglik(&yf, &l) / n,
            Err(_) => f64::INFINITY,
        }
    };
    let min = Bfgs::default().minimize(objective, &start.to_vec());
    if !min.converged || !min.value.is_finite() {
        return Err(CoreError::Fit(format!(
            "INGARCH quasi-likelihood did not converge after {} iterations",
            min.iterations
        )));
    }
    let params = IngarchParams::from_slice(spec, &min.x);
    let lambda = lambda_path_f(spec, &params, &yf, ybar)
        .map_err(|_| CoreError::Fit("fitted INGARCH mean is not positive".into()))?;
    let dispersion = pearson_dispersion(&yf, &lambda, m);
    Ok(IngarchFit {
        spec: spec.clone(),
        loglik: poisson_quasi_loglik(&yf, &lambda),
        params,
        near_poisson: dispersion > NEAR_POISSON_DISPERSION,
        dispersion,
        lambda_path: lambda,
        degenerate: false,
        iterations: min.iterations,
    })
}

/// Starting values: half the persistence split evenly across lags, the
/// intercept matching the sample mean.
fn moment_start(spec: &IngarchSpec, ybar: f64) -> IngarchParams {
    let (p, q) = (spec.obs_lags.len(), spec.mean_lags.len());
    let share = 0.5 / (p + q).max(1) as f64;
    IngarchParams {
        intercept: (ybar * (1.0 - share * (p + q) as f64)).max(1e-3),
        obs_coeffs: vec![share; p],
        mean_coeffs: vec![share; q],
    }
}

/// Solves `Σ (y−λ)²/(λ + λ²/φ) = T − m` for φ; returns [`MAX_DISPERSION`]
/// when even the Poisson variance over-explains the spread.
pub fn pearson_dispersion(y: &[f64], lambda: &[f64], n_params: usize) -> f64 {
    let target = y.len() as f64 - n_params as f64;
    let pearson = |phi: f64| -> f64 {
        y.iter()
            .zip(lambda)
            .map(|(y, l)| (y - l).powi(2) / (l + l * l / phi))
            .sum()
    };
    if pearson(MAX_DISPERSION) <= target {
        return MAX_DISPERSION;
    }
    // pearson(φ) increases in φ
    let (mut lo, mut hi) = (1e-8f64.ln(), MAX_DISPERSION.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pearson(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Simulates counts; `dispersion = ∞` gives Poisson counts. A burn-in of
/// 500 steps started at the stationary mean is discarded.
pub fn ingarch_simulate(
    spec: &IngarchSpec,
    params: &IngarchParams,
    dispersion: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    params.check(spec)?;
    let persistence = params.persistence();
    if persistence >= 1.0 || !(params.intercept > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "INGARCH parameters need a positive intercept and coefficient sum < 1 (sum {persistence})"
        )));
    }
    if !(dispersion > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "dispersion must be positive, got {dispersion}"
        )));
    }
    let burn = 500;
    let mu = params.intercept / (1.0 - persistence);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = burn + n;
    let mut y: Vec<f64> = Vec::with_capacity(total);
    let mut lambda: Vec<f64> = Vec::with_capacity(total);
    let mut obs = vec![0.0; spec.obs_lags.len()];
    let mut means = vec![0.0; spec.mean_lags.len()];
    for t in 0..total {
        for (o, &l) in obs.iter_mut().zip(&spec.obs_lags) {
            *o = if t >= l { y[t - l] } else { mu };
        }
        for (m, &l) in means.iter_mut().zip(&spec.mean_lags) {
            *m = if t >= l { lambda[t - l] } else { mu };
        }
        let lam = params.predict(&obs, &means);
        if !(lam > 0.0) {
            return Err(CoreError::NonPositiveIntensity(t));
        }
        let rate = if dispersion.is_finite() {
            let g = Gamma::new(dispersion, lam / dispersion).map_err(|e| CoreError::InvalidInput(e.to_string()))?;
            rng.sample(g)
        } else {
            lam
        };
        let count = if rate > 0.0 {
            rng.sample(Poisson::new(rate).map_err(|e| CoreError::InvalidInput(e.to_string()))?)
        } else {
            0.0
        };
        y.push(count);
        lambda.push(lam);
    }
    Ok(y[burn..].iter().map(|&v| v as u64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(b0: f64, a: &[f64], b: &[f64]) -> IngarchParams {
        IngarchParams {
            intercept: b0,
            obs_coeffs: a.to_vec(),
            mean_coeffs: b.to_vec(),
        }
    }

    #[test]
    fn hand_value_of_weekly_model() {
        let p = params(0.037, &[1.0], &[0.147, 0.012, -0.165]);
        let lam = p.predict(&[50.0], &[45.0, 44.0, 43.0]);
        let expect = 0.037 + 50.0 + 0.147 * 45.0 + 0.012 * 44.0 - 0.165 * 43.0;
        assert!((lam - expect).abs() < 1e-12);
        assert!((lam - 50.085).abs() < 1e-12);
    }

    #[test]
    fn trivial_paths() {
        let spec = IngarchSpec::new(vec![1], vec![1]).unwrap();
        let y = [3, 8, 1, 4];
        assert_eq!(
            lambda_path(&spec, &params(2.5, &[0.0], &[0.0]), &y).unwrap(),
            vec![2.5; 4]
        );
        let persist = lambda_path(&spec, &params(0.0, &[1.0], &[0.0]), &y).unwrap();
        assert_eq!(persist, vec![4.0, 3.0, 8.0, 1.0]);
        assert!(matches!(
            lambda_path(&spec, &params(-1.0, &[0.0], &[0.0]), &y),
            Err(CoreError::NonPositiveIntensity(0))
        ));
    }

    #[test]
    fn path_is_linear_in_parameters() {
        let spec = IngarchSpec::new(vec![1, 2], vec![]).unwrap();
        let y = [5, 9, 2, 7, 7, 3];
        let p = params(1.0, &[0.2, 0.3], &[]);
        let q = params(2.0, &[0.1, 0.05], &[]);
        let sum = params(3.0, &[0.3, 0.35], &[]);
        let (lp, lq, ls) = (
            lambda_path(&spec, &p, &y).unwrap(),
            lambda_path(&spec, &q, &y).unwrap(),
            lambda_path(&spec, &sum, &y).unwrap(),
        );
        for i in 0..y.len() {
            assert!((lp[i] + lq[i] - ls[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(IngarchSpec::new(vec![1, 1], vec![]).is_err());
        assert!(IngarchSpec::new(vec![0], vec![]).is_err());
        assert_eq!(IngarchSpec::new(vec![3, 1], vec![]).unwrap().obs_lags, vec![1, 3]);
    }

    #[test]
    fn simulation_mean_and_determinism() {
        let spec = IngarchSpec::new(vec![1], vec![1]).unwrap();
        let p = params(5.0, &[0.4], &[0.3]);
        let a = ingarch_simulate(&spec, &p, 10.0, 20_000, 1).unwrap();
        assert_eq!(a, ingarch_simulate(&spec, &p, 10.0, 20_000, 1).unwrap());
        let m = a.iter().sum::<u64>() as f64 / a.len() as f64;
        assert!((m - 5.0 / 0.3).abs() < 0.5, "{m}");
        let iid = ingarch_simulate(&spec, &params(7.0, &[0.0], &[0.0]), 5.0, 20_000, 2).unwrap();
        let m = iid.iter().sum::<u64>() as f64 / iid.len() as f64;
        assert!((m - 7.0).abs() < 0.1, "{m}");
        assert!(ingarch_simulate(&spec, &params(1.0, &[0.6], &[0.5]), 10.0, 10, 0).is_err());
    }

    #[test]
    fn recovers_parameters() {
        let spec = IngarchSpec::new(vec![1], vec![1]).unwrap();
        let truth = params(5.0, &[0.4], &[0.3]);
        let y = ingarch_simulate(&spec, &truth, 10.0, 3000, 5).unwrap();
        let fit = fit_ingarch_qcml(&y, &spec).unwrap();
        assert!((fit.params.obs_coeffs[0] - 0.4).abs() < 0.1, "{fit:?}");
        assert!((fit.params.mean_coeffs[0] - 0.3).abs() < 0.1, "{:?}", fit.params);
        assert!((fit.dispersion - 10.0).abs() < 3.0, "{}", fit.dispersion);
        assert!(!fit.near_poisson);
        assert!(fit.lambda_path.iter().all(|&l| l > 0.0));
        // the optimum beats the starting point
        let ybar = y.iter().sum::<u64>() as f64 / y.len() as f64;
        let start = moment_start(&spec, ybar);
        let l0 = lambda_path(&spec, &start, &y).unwrap();
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        assert!(fit.loglik >= poisson_quasi_loglik(&yf, &l0));
    }

    #[test]
    fn poisson_data_flagged() {
        let spec = IngarchSpec::new(vec![1], vec![1]).unwrap();
        let y = ingarch_simulate(&spec, &params(5.0, &[0.4], &[0.3]), f64::INFINITY, 3000, 8).unwrap();
        let fit = fit_ingarch_qcml(&y, &spec).unwrap();
        assert!(fit.near_poisson, "{}", fit.dispersion);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let spec = IngarchSpec::weekly_default();
        let fit = fit_ingarch_qcml(&[12; 100], &spec).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.params.intercept, 12.0);
        assert!(fit
            .params
            .obs_coeffs
            .iter()
            .chain(&fit.params.mean_coeffs)
            .all(|&c| c == 0.0));
        assert!(fit_ingarch_qcml(&[0; 100], &spec).is_err());
        assert!(fit_ingarch_qcml(&[1, 2, 3], &spec).is_err());
    }

    #[test]
    fn dispersion_equation_is_solved() {
        let y = [3.0, 9.0, 1.0, 14.0, 6.0, 0.0, 11.0];
        let l = [5.0; 7];
        let phi = pearson_dispersion(&y, &l, 1);
        let lhs: f64 = y.iter().map(|v| (v - 5.0f64).powi(2) / (5.0 + 25.0 / phi)).sum();
        assert!((lhs - 6.0).abs() < 1e-8);
        assert_eq!(pearson_dispersion(&[5.0, 5.0, 5.0], &[5.0; 3], 1), MAX_DISPERSION);
    }

    #[test]
    fn rounding() {
        assert_eq!(round_to_counts(&[0.4, 2.5, 7.0]).unwrap(), vec![0, 3, 7]);
        assert!(round_to_counts(&[-1.0]).is_err());
    }
}
