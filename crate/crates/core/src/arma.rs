//! ARIMA(p, d, q) fitted by conditional sum of squares.
//!
//! After `d`-fold differencing the working series `w` follows
//! `w_t = c + Σ φ_i w_{t−i} + e_t + Σ θ_j e_{t−j}`. Residuals are computed
//! conditionally on the first `p` observations with pre-sample errors set to
//! zero, and `(c, φ, θ)` minimise their sum of squares.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{CoreError, Result};
use crate::optim::NelderMead;
use crate::stats::{autocorrelations, check_finite, mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        ArimaOrder { p, d, q }
    }
}

impl std::str::FromStr for ArimaOrder {
    type Err = CoreError;

    /// Parses `p,d,q`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split([',', ' '])
            .filter(|t| !t.is_empty())
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CoreError::InvalidInput(format!("cannot parse ARIMA order `{s}`")))?;
        match parts[..] {
            [p, d, q] => Ok(ArimaOrder { p, d, q }),
            _ => Err(CoreError::InvalidInput(format!("ARIMA order needs p,d,q; got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    /// Constant `c` of the differenced equation (not the mean).
    pub intercept: f64,
    pub innovation_sd: f64,
}

impl ArmaModel {
    pub fn order(&self) -> ArimaOrder {
        ArimaOrder::new(self.p, self.d, self.q)
    }

    pub fn white_noise(mean: f64, sd: f64) -> Self {
        ArmaModel {
            p: 0,
            d: 0,
            q: 0,
            ar_coeffs: vec![],
            ma_coeffs: vec![],
            intercept: mean,
            innovation_sd: sd,
        }
    }

    pub fn is_stationary(&self) -> bool {
        is_stationary(&self.ar_coeffs)
    }

    pub fn is_invertible(&self) -> bool {
        let neg: Vec<f64> = self.ma_coeffs.iter().map(|v| -v).collect();
        is_stationary(&neg)
    }

    /// Unconditional mean of the differenced series.
    pub fn process_mean(&self) -> f64 {
        self.intercept / (1.0 - self.ar_coeffs.iter().sum::<f64>())
    }
}

/// Whether `1 − Σ φ_i zⁱ` has all roots outside the unit circle, via the
/// step-down (reverse Durbin–Levinson) recursion: stationary iff every
/// implied partial autocorrelation lies strictly inside (−1, 1).
pub fn is_stationary(ar: &[f64]) -> bool {
    let mut a = ar.to_vec();
    while let Some(&r) = a.last() {
        if !r.is_finite() || r.abs() >= 1.0 {
            return false;
        }
        let k = a.len();
        let denom = 1.0 - r * r;
        a = (0..k - 1).map(|j| (a[j] + r * a[k - 2 - j]) / denom).collect();
    }
    true
}

pub fn difference(y: &[f64], d: usize) -> Vec<f64> {
    let mut w = y.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    w
}

/// Conditional residuals of the differenced series; the first `p` are zero.
fn css_residuals(w: &[f64], c: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let p = ar.len();
    let mut e = vec![0.0; w.len()];
    for t in p..w.len() {
        let mut pred = c;
        for (i, phi) in ar.iter().enumerate() {
            pred += phi * w[t - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                pred += theta * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
    }
    e
}

fn css(w: &[f64], c: f64, ar: &[f64], ma: &[f64]) -> f64 {
    css_residuals(w, c, ar, ma)[ar.len()..].iter().map(|v| v * v).sum()
}

/// Least-squares regression of `w_t` on a constant plus the given lagged
/// regressors, for `t >= start`.
fn ols_lags(w: &[f64], regressors: &[&[f64]], lags: &[usize], start: usize) -> Option<Vec<f64>> {
    let rows = w.len().checked_sub(start)?;
    let cols = 1 + lags.len();
    if rows <= cols {
        return None;
    }
    let mut x = DMatrix::<f64>::zeros(rows, cols);
    let mut yv = DVector::<f64>::zeros(rows);
    for (r, t) in (start..w.len()).enumerate() {
        x[(r, 0)] = 1.0;
        for (k, (series, lag)) in regressors.iter().zip(lags).enumerate() {
            x[(r, k + 1)] = series[t - lag];
        }
        yv[r] = w[t];
    }
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * yv;
    let sol = xtx.cholesky()?.solve(&xty);
    Some(sol.iter().copied().collect())
}

fn ar_ols(w: &[f64], p: usize) -> Option<(f64, Vec<f64>)> {
    let regs: Vec<&[f64]> = vec![w; p];
    let lags: Vec<usize> = (1..=p).collect();
    let beta = ols_lags(w, &regs, &lags, p)?;
    Some((beta[0], beta[1..].to_vec()))
}

/// Hannan–Rissanen start: long-AR residuals as a proxy for the innovations,
/// then OLS on lagged values and lagged proxy residuals.
fn hannan_rissanen(w: &[f64], p: usize, q: usize) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let m = (p + q + 5).max(10).min(w.len() / 4);
    let (c_long, ar_long) = ar_ols(w, m)?;
    let ehat = css_residuals(w, c_long, &ar_long, &[]);
    let mut regs: Vec<&[f64]> = vec![w; p];
    regs.extend(std::iter::repeat_n(ehat.as_slice(), q));
    let lags: Vec<usize> = (1..=p).chain(1..=q).collect();
    let beta = ols_lags(w, &regs, &lags, m + q.max(p))?;
    Some((beta[0], beta[1..=p].to_vec(), beta[p + 1..].to_vec()))
}

pub fn fit_arma_css(y: &[f64], p: usize, d: usize, q: usize) -> Result<ArmaModel> {
    check_finite(y)?;
    let n_par = p + q + 1;
    if y.len() <= 10 * n_par {
        return Err(CoreError::Fit(format!(
            "series of length {} too short for ARIMA({p},{d},{q}); need more than {}",
            y.len(),
            10 * n_par
        )));
    }
    let w = difference(y, d);
    let var = sample_variance(&w);
    let mu = mean(&w);
    if !(var > 1e-20 * (1.0 + mu * mu)) {
        return Err(CoreError::Fit("series is (nearly) constant".into()));
    }
    let n_used = (w.len() - p) as f64;

    // Pure AR: CSS is linear least squares, solved exactly.
    if q == 0 {
        let (c, ar) = if p == 0 {
            (mu, vec![])
        } else {
            ar_ols(&w, p).ok_or_else(|| CoreError::Fit("singular AR design matrix".into()))?
        };
        if !is_stationary(&ar) {
            return Err(CoreError::NonStationary(format!("fitted AR coefficients {ar:?}")));
        }
        let ss = css(&w, c, &ar, &[]);
        return Ok(ArmaModel {
            p,
            d,
            q,
            ar_coeffs: ar,
            ma_coeffs: vec![],
            intercept: c,
            innovation_sd: (ss / n_used).sqrt(),
        });
    }

    // Standardise so the simplex steps are well scaled.
    let sd = var.sqrt();
    let z: Vec<f64> = w.iter().map(|v| (v - mu) / sd).collect();
    let admissible = |ar: &[f64], ma: &[f64]| {
        let neg: Vec<f64> = ma.iter().map(|v| -v).collect();
        is_stationary(ar) && is_stationary(&neg)
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some((c, ar, ma)) = hannan_rissanen(&z, p, q) {
        if admissible(&ar, &ma) {
            starts.push([vec![c], ar, ma].concat());
        }
    }
    let ar0 = match ar_ols(&z, p) {
        Some((_, ar)) if is_stationary(&ar) => ar,
        _ => vec![0.0; p],
    };
    starts.push([vec![0.0], ar0, vec![0.0; q]].concat());

    let objective = |x: &[f64]| {
        let (ar, ma) = (&x[1..=p], &x[p + 1..]);
        if !admissible(ar, ma) {
            return f64::INFINITY;
        }
        css(&z, x[0], ar, ma)
    };
    let nm = NelderMead::default();
    let best = starts
        .iter()
        .map(|s| nm.minimize(objective, s))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    if !best.value.is_finite() {
        return Err(CoreError::Fit("optimizer found no admissible parameters".into()));
    }
    if !best.converged {
        return Err(CoreError::Fit(format!(
            "simplex did not converge within {} iterations",
            best.iterations
        )));
    }
    let ar = best.x[1..=p].to_vec();
    let ma = best.x[p + 1..].to_vec();
    // Back to the original scale: w = mu + sd z.
    let intercept = mu * (1.0 - ar.iter().sum::<f64>()) + sd * best.x[0];
    let ss = css(&w, intercept, &ar, &ma);
    Ok(ArmaModel {
        p,
        d,
        q,
        ar_coeffs: ar,
        ma_coeffs: ma,
        intercept,
        innovation_sd: (ss / n_used).sqrt(),
    })
}

/// Conditional sum of squares of `model` on `y`.
pub fn css_objective(model: &ArmaModel, y: &[f64]) -> f64 {
    let w = difference(y, model.d);
    css(&w, model.intercept, &model.ar_coeffs, &model.ma_coeffs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaResiduals {
    /// One-step-ahead errors aligned with the input; burn-in entries are 0.
    pub values: Vec<f64>,
    /// Leading entries without a genuine one-step prediction
    /// (`d + max(p, q)`).
    pub burn_in: usize,
}

impl ArmaResiduals {
    pub fn effective(&self) -> &[f64] {
        &self.values[self.burn_in.min(self.values.len())..]
    }

    /// `y_t − e_t`.
    pub fn fitted(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.values).map(|(a, e)| a - e).collect()
    }
}

pub fn arma_residuals(model: &ArmaModel, y: &[f64]) -> Result<ArmaResiduals> {
    check_finite(y)?;
    if y.len() < model.p.max(model.q) + model.d + 1 {
        return Err(CoreError::InvalidInput(format!(
            "series of length {} too short for residuals of ARIMA({},{},{})",
            y.len(),
            model.p,
            model.d,
            model.q
        )));
    }
    let w = difference(y, model.d);
    let e = css_residuals(&w, model.intercept, &model.ar_coeffs, &model.ma_coeffs);
    let mut values = vec![0.0; model.d];
    values.extend(e);
    Ok(ArmaResiduals {
        values,
        burn_in: (model.d + model.p.max(model.q)).min(y.len()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjungBox {
    pub statistic: f64,
    pub lags: usize,
    pub p_value: f64,
}

/// Ljung–Box portmanteau test of zero autocorrelation up to `lags`.
pub fn ljung_box_test(x: &[f64], lags: usize) -> Result<LjungBox> {
    check_finite(x)?;
    let n = x.len();
    if lags == 0 || 2 * lags >= n {
        return Err(CoreError::InvalidInput(format!(
            "Ljung–Box needs 1 <= lags < n/2 (lags {lags}, n {n})"
        )));
    }
    if sample_variance(x) == 0.0 {
        return Err(CoreError::ConstantSeries("autocorrelation"));
    }
    let nf = n as f64;
    let q: f64 = autocorrelations(x, lags)
        .iter()
        .enumerate()
        .map(|(i, r)| r * r / (nf - (i + 1) as f64))
        .sum::<f64>()
        * nf
        * (nf + 2.0);
    let chi = ChiSquared::new(lags as f64).map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    Ok(LjungBox {
        statistic: q,
        lags,
        p_value: chi.sf(q),
    })
}

const SIM_BURN_IN: usize = 500;

/// Simulate `n` observations; differenced models are integrated from zero.
pub fn simulate_arma(model: &ArmaModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !model.is_stationary() {
        return Err(CoreError::NonStationary(format!(
            "AR coefficients {:?}",
            model.ar_coeffs
        )));
    }
    if !(model.innovation_sd >= 0.0 && model.innovation_sd.is_finite()) {
        return Err(CoreError::InvalidInput("innovation sd must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n + SIM_BURN_IN;
    let mu = model.process_mean();
    let mut w = vec![mu; total];
    let mut e = vec![0.0; total];
    for t in 0..total {
        let eps: f64 = StandardNormal.sample(&mut rng);
        e[t] = model.innovation_sd * eps;
        let mut v = model.intercept + e[t];
        for (i, phi) in model.ar_coeffs.iter().enumerate() {
            v += phi * if t > i { w[t - 1 - i] } else { mu };
        }
        for (j, theta) in model.ma_coeffs.iter().enumerate() {
            if t > j {
                v += theta * e[t - 1 - j];
            }
        }
        w[t] = v;
    }
    let mut out = w.split_off(SIM_BURN_IN);
    for _ in 0..model.d {
        let mut acc = 0.0;
        for v in out.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    Ok(out)
}
