//! Unconstrained minimisers used by the model fits.
//!
//! Objectives may return `f64::INFINITY` (or NaN) to reject a point; both
//! minimisers treat such points as worse than any finite value.

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    pub initial_step: f64,
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_iter: 5000,
            f_tol: 1e-8,
            initial_step: 0.1,
            restarts: 3,
        }
    }
}

impl NelderMead {
    /// Minimise `f` from `x0`, restarting from the incumbent with a fresh
    /// simplex until a restart no longer improves the value.
    pub fn minimize<F: Fn(&[f64]) -> f64>(&self, f: F, x0: &[f64]) -> Minimum {
        let mut best = self.run(&f, x0);
        for _ in 0..self.restarts {
            let next = self.run(&f, &best.x);
            let improved = next.value < best.value - self.f_tol * (1.0 + best.value.abs());
            let iterations = best.iterations + next.iterations;
            if next.value <= best.value {
                best = Minimum { iterations, ..next };
            }
            if !improved {
                break;
            }
        }
        best
    }

    fn run<F: Fn(&[f64]) -> f64>(&self, f: &F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let eval = |x: &[f64]| sanitize(f(x));
        if n == 0 {
            return Minimum {
                x: vec![],
                value: eval(&[]),
                iterations: 0,
                converged: true,
            };
        }
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        for i in 0..n {
            let mut x = x0.to_vec();
            let step = if x[i].abs() > 1e-3 {
                self.initial_step * x[i].abs()
            } else {
                self.initial_step
            };
            x[i] += step;
            let v = eval(&x);
            simplex.push((x, v));
        }

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            iterations += 1;
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            if hi.is_finite() && (hi - lo).abs() <= self.f_tol * (lo.abs() + self.f_tol) {
                converged = true;
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };
            let xr = along(-alpha);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(-alpha * gamma);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(-alpha * rho);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(rho);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for p in simplex.iter_mut().skip(1) {
                        for (xj, bj) in p.0.iter_mut().zip(&best) {
                            *xj = bj + sigma * (*xj - bj);
                        }
                        p.1 = eval(&p.0);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            iterations,
            converged,
        }
    }
}

/// Quasi-Newton (BFGS) with central finite-difference gradients and a
/// backtracking Armijo line search.
#[derive(Debug, Clone, Copy)]
pub struct Bfgs {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
}

impl Default for Bfgs {
    fn default() -> Self {
        Bfgs {
            max_iter: 500,
            grad_tol: 1e-6,
            f_tol: 1e-12,
        }
    }
}

pub fn numerical_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1e-2);
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = sanitize(f(&xp));
            xp[i] = orig - h;
            let fm = sanitize(f(&xp));
            xp[i] = orig;
            if fp.is_finite() && fm.is_finite() {
                (fp - fm) / (2.0 * h)
            } else {
                // one-sided at a barrier
                let f0 = sanitize(f(x));
                if fp.is_finite() {
                    (fp - f0) / h
                } else if fm.is_finite() {
                    (f0 - fm) / h
                } else {
                    0.0
                }
            }
        })
        .collect()
}

impl Bfgs {
    pub fn minimize<F: Fn(&[f64]) -> f64>(&self, f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut x = x0.to_vec();
        let mut fx = sanitize(f(&x));
        let mut g = numerical_gradient(&f, &x);
        let mut h_inv = identity(n);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.max_iter {
            iterations += 1;
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < self.grad_tol * (1.0 + fx.abs()) {
                converged = true;
                break;
            }
            let mut dir: Vec<f64> = (0..n)
                .map(|i| -(0..n).map(|j| h_inv[i][j] * g[j]).sum::<f64>())
                .collect();
            let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
            if slope >= 0.0 {
                // not a descent direction: fall back to steepest descent
                h_inv = identity(n);
                dir = g.iter().map(|v| -v).collect();
                slope = -gnorm * gnorm;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                let fn_ = sanitize(f(&xn));
                if fn_.is_finite() && fn_ <= fx + 1e-4 * t * slope {
                    accepted = Some((xn, fn_));
                    break;
                }
                t *= 0.5;
            }
            let Some((xn, fn_)) = accepted else {
                converged = gnorm < 1e-3 * (1.0 + fx.abs());
                break;
            };
            let gn = numerical_gradient(&f, &xn);
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            let df = fx - fn_;
            x = xn;
            g = gn;
            fx = fn_;
            if sy > 1e-12 {
                let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h_inv[i][j] * y[j]).sum()).collect();
                let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
                let rho = 1.0 / sy;
                for i in 0..n {
                    for j in 0..n {
                        h_inv[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                    }
                }
            }
            if df.abs() <= self.f_tol * (1.0 + fx.abs()) {
                converged = true;
                break;
            }
        }
        Minimum {
            x,
            value: fx,
            iterations,
            converged,
        }
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let nm = NelderMead {
            f_tol: 1e-14,
            ..Default::default()
        };
        let m = nm.minimize(rosenbrock, &[-1.2, 1.0]);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn bfgs_finds_rosenbrock_minimum() {
        let m = Bfgs::default().minimize(rosenbrock, &[-1.2, 1.0]);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn barriers_are_respected() {
        // minimum of (x-1)^2 subject to x > 2 sits at the barrier
        let f = |x: &[f64]| {
            if x[0] <= 2.0 {
                f64::INFINITY
            } else {
                (x[0] - 1.0).powi(2)
            }
        };
        let m = Bfgs::default().minimize(f, &[5.0]);
        assert!(m.x[0] > 2.0 && m.x[0] < 2.01, "{:?}", m.x);
        let m = NelderMead::default().minimize(f, &[5.0]);
        assert!(m.x[0] > 2.0 && m.x[0] < 2.01, "{:?}", m.x);
    }
}
