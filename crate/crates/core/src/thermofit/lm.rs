//! Damped Gauss-Newton (Levenberg-Marquardt) for small parameter counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once `max |J^T r|` falls below this.
    pub gradient_tolerance: f64,
    /// Stop once an accepted step changes the cost by less than this fraction.
    pub cost_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 500, gradient_tolerance: 1e-10, cost_tolerance: 1e-15, initial_damping: 1e-3 }
    }
}

/// Multi-start and solver settings shared by all fitters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub seed: u64,
    /// Extra randomized starts beyond the deterministic initial guess.
    pub restarts: usize,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { seed: 0x5eed, restarts: 8, lm: LmOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmSolution {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `s^2 (J^T J)^{-1}` with `s^2 = cost / (n - p)`; `None` if singular.
    pub covariance: Option<Vec<Vec<f64>>>,
}

impl LmSolution {
    pub fn std_error(&self, k: usize) -> f64 {
        self.covariance.as_ref().map_or(f64::INFINITY, |c| c[k][k].max(0.0).sqrt())
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian<F: Fn(&[f64], &mut [f64])>(f: &F, x: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|k| {
            let h = 1e-6 * x[k].abs().max(1e-3);
            xp[k] = x[k] + h;
            f(&xp, &mut plus);
            xp[k] = x[k] - h;
            f(&xp, &mut minus);
            xp[k] = x[k];
            plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect()
}

/// Normal matrix `J^T J` and gradient `J^T r` from column-major `J`.
fn normal_equations(jac: &[Vec<f64>], r: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = jac.len();
    let mut jtj = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in a..p {
            let v: f64 = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
            jtj[a][b] = v;
            jtj[b][a] = v;
        }
    }
    let grad = jac.iter().map(|col| col.iter().zip(r).map(|(x, y)| x * y).sum()).collect();
    (jtj, grad)
}

/// Cholesky solve of a small symmetric positive-definite system.
pub fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

fn invert_spd(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        cols.push(solve_spd(a, &e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

/// Minimizes `sum r_k(x)^2` from `x0`; `f` writes the `n` residuals.
pub fn levenberg_marquardt<F: Fn(&[f64], &mut [f64])>(f: &F, n: usize, x0: &[f64], opts: &LmOptions) -> LmSolution {
    let p = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    f(&x, &mut r);
    let mut cost = sum_sq(&r);
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    if !cost.is_finite() {
        return LmSolution { params: x, residuals: r, cost, iterations, converged, covariance: None };
    }
    while iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(f, &x, n);
        let (jtj, grad) = normal_equations(&jac, &r);
        if grad.iter().all(|g| g.abs() <= opts.gradient_tolerance) || cost == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj.clone();
            for (k, row) in damped.iter_mut().enumerate() {
                row[k] += lambda * jtj[k][k].max(1e-12);
            }
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            let Some(delta) = solve_spd(&damped, &neg) else {
                lambda *= 10.0;
                continue;
            };
            let xt: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
            f(&xt, &mut trial);
            let trial_cost = sum_sq(&trial);
            if trial_cost.is_finite() && trial_cost < cost {
                let relative = (cost - trial_cost) / cost;
                let step_small = delta.iter().zip(&xt).all(|(d, v)| d.abs() <= 1e-14 * (v.abs() + 1e-14));
                x = xt;
                std::mem::swap(&mut r, &mut trial);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                if relative < opts.cost_tolerance || step_small {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step at any damping: a stationary point to working precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let jac = jacobian(f, &x, n);
    let (jtj, _) = normal_equations(&jac, &r);
    let dof = n.saturating_sub(p);
    let s2 = if dof > 0 { cost / dof as f64 } else { 0.0 };
    let covariance = invert_spd(&jtj).map(|inv| inv.into_iter().map(|row| row.into_iter().map(|v| v * s2).collect()).collect());
    LmSolution { params: x, residuals: r, cost, iterations, converged, covariance }
}

/// Runs from `x0` plus `opts.restarts` jittered copies (relative jitter
/// `spread`), returning the lowest-cost solution. Deterministic in `opts.seed`.
pub fn multistart<F: Fn(&[f64], &mut [f64])>(
    f: &F,
    n: usize,
    x0: &[f64],
    spread: &[f64],
    opts: &FitOptions,
) -> LmSolution {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = levenberg_marquardt(f, n, x0, &opts.lm);
    for _ in 0..opts.restarts {
        let start: Vec<f64> =
            x0.iter().zip(spread).map(|(&x, &s)| x + s * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let sol = levenberg_marquardt(f, n, &start, &opts.lm);
        if sol.cost < best.cost || (!best.cost.is_finite() && sol.cost.is_finite()) {
            best = sol;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_is_exact() {
        let xs: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let f = |p: &[f64], r: &mut [f64]| {
            for ((ri, x), y) in r.iter_mut().zip(&xs).zip(&ys) {
                *ri = p[0] + p[1] * x - y;
            }
        };
        let sol = levenberg_marquardt(&f, xs.len(), &[0.0, 0.0], &LmOptions::default());
        assert!(sol.converged);
        assert!((sol.params[0] - 3.0).abs() < 1e-9 && (sol.params[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock_from_a_bad_start() {
        let f = |p: &[f64], r: &mut [f64]| {
            r[0] = 10.0 * (p[1] - p[0] * p[0]);
            r[1] = 1.0 - p[0];
        };
        let sol = levenberg_marquardt(&f, 2, &[-1.2, 1.0], &LmOptions::default());
        assert!((sol.params[0] - 1.0).abs() < 1e-6 && (sol.params[1] - 1.0).abs() < 1e-6, "{sol:?}");
    }

    #[test]
    fn multistart_is_deterministic() {
        let f = |p: &[f64], r: &mut [f64]| {
            r[0] = (p[0] * 3.0).sin() + 0.1 * p[0];
        };
        let opts = FitOptions::default();
        let a = multistart(&f, 1, &[2.0], &[3.0], &opts);
        let b = multistart(&f, 1, &[2.0], &[3.0], &opts);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn spd_solver() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let x = solve_spd(&a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14 && (x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
        assert!(solve_spd(&[vec![0.0]], &[1.0]).is_none());
    }
}
