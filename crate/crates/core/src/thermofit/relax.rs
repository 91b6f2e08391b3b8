//! Relaxation toward a plateau: bi-exponential envelopes and tail statistics.

use serde::{Deserialize, Serialize};

use super::lm::{multistart, FitOptions, LmSolution};
use crate::error::{Error, Result};

pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;
pub const MIN_TAIL_POINTS: usize = 10;
pub const MIN_RELAX_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauStats {
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub mean: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub std: f64,
    pub count: usize,
}

/// Mean and sample standard deviation of the final `tail_fraction` of `values`.
pub fn plateau_stats(values: &[f64], tail_fraction: f64) -> Result<PlateauStats> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("tail fraction {tail_fraction} outside (0, 1]")));
    }
    let count = ((values.len() as f64) * tail_fraction).floor() as usize;
    if count < MIN_TAIL_POINTS {
        return Err(Error::InsufficientData { needed: MIN_TAIL_POINTS, got: count });
    }
    let tail = &values[values.len() - count..];
    let mean = tail.iter().sum::<f64>() / count as f64;
    let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
    Ok(PlateauStats { mean, std: var.sqrt(), count })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFit {
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub a1: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub a2: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub tau1: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub tau2: f64,
    /// Residual floor of `|y - plateau|`.
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub floor: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub a1_error: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub a2_error: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub tau1_error: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub tau2_error: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub plateau: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub residual_norm: f64,
    /// The data do not support two distinct time constants; the single
    /// exponential is reported with `a2 = 0` and `tau2 = tau1`.
    pub degenerate: bool,
}

impl RelaxationFit {
    pub fn envelope(&self, t: f64) -> f64 {
        self.a1 * (-t / self.tau1).exp() + self.a2 * (-t / self.tau2).exp() + self.floor
    }
}

/// Fits `ln |y - plateau|` against `ln(a1 e^{-t/tau1} + a2 e^{-t/tau2} + floor)`.
/// Points with `|y - plateau|` at the rounding level are skipped.
pub fn fit_biexponential(times: &[f64], values: &[f64], plateau: f64, opts: &FitOptions) -> Result<RelaxationFit> {
    if times.len() != values.len() {
        return Err(Error::ShapeMismatch(format!("{} times, {} values", times.len(), values.len())));
    }
    let scale = values.iter().map(|v| (v - plateau).abs()).fold(0.0f64, f64::max);
    let (ts, ds): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .map(|(&t, &v)| (t, (v - plateau).abs()))
        .filter(|(_, d)| *d > 1e-12 * scale.max(f64::MIN_POSITIVE))
        .unzip();
    if ts.len() < MIN_RELAX_POINTS {
        return Err(Error::InsufficientData { needed: MIN_RELAX_POINTS, got: ts.len() });
    }
    let span = ts.iter().fold(0.0f64, |m, &t| m.max(t)) - ts.iter().fold(f64::INFINITY, |m, &t| m.min(t));
    if !(span > 0.0) {
        return Err(Error::InvalidConfig("relaxation times must span a positive interval".into()));
    }
    let d0 = ds[0];
    let floor0 = {
        let mut tail: Vec<f64> = ds[ds.len() - ds.len().div_ceil(5)..].to_vec();
        tail.sort_by(f64::total_cmp);
        tail[tail.len() / 2].max(1e-6 * d0)
    };
    let n = ts.len();

    // Single exponential: (ln a, ln tau, ln floor).
    let single = |p: &[f64], r: &mut [f64]| {
        let (a, tau, fl) = (p[0].exp(), p[1].exp(), p[2].exp());
        for ((ri, &t), &d) in r.iter_mut().zip(&ts).zip(&ds) {
            *ri = (a * (-t / tau).exp() + fl).ln() - d.ln();
        }
    };
    let tau_guess = span / 10.0;
    let s = multistart(&single, n, &[d0.ln(), tau_guess.ln(), floor0.ln()], &[0.5, 2.0, 1.0], opts);

    // Two exponentials: (ln a1, ln a2, ln tau1, ln tau2, ln floor).
    let double = |p: &[f64], r: &mut [f64]| {
        let (a1, a2, t1, t2, fl) = (p[0].exp(), p[1].exp(), p[2].exp(), p[3].exp(), p[4].exp());
        for ((ri, &t), &d) in r.iter_mut().zip(&ts).zip(&ds) {
            *ri = (a1 * (-t / t1).exp() + a2 * (-t / t2).exp() + fl).ln() - d.ln();
        }
    };
    let mut best: Option<LmSolution> = None;
    for (frac, ratio) in [(0.9f64, 6.0f64), (0.7, 3.0), (0.95, 20.0), (0.5, 10.0)] {
        let x0 = [(d0 * frac).ln(), (d0 * (1.0 - frac)).ln(), (tau_guess / ratio.sqrt()).ln(), (tau_guess * ratio.sqrt()).ln(), floor0.ln()];
        let sol = multistart(&double, n, &x0, &[0.5, 0.5, 1.0, 1.0, 1.0], opts);
        if best.as_ref().is_none_or(|b| sol.cost < b.cost) {
            best = Some(sol);
        }
    }
    let d = best.expect("at least one start");
    if !s.cost.is_finite() && !d.cost.is_finite() {
        return Err(Error::FitFailed { reason: "relaxation residuals are not finite".into(), residual: f64::NAN });
    }
    let (t1, t2) = (d.params[2].exp(), d.params[3].exp());
    let (a1, a2) = (d.params[0].exp(), d.params[1].exp());
    let distinct = (t1 - t2).abs() > 1e-3 * t1.max(t2) && a1.min(a2) > 1e-3 * a1.max(a2);
    let improves = d.cost < s.cost * (1.0 - 1e-3);
    if distinct && improves && d.converged {
        let swap = t1 > t2;
        let (i1, i2) = if swap { (1, 3) } else { (0, 2) };
        let (j1, j2) = if swap { (0, 2) } else { (1, 3) };
        return Ok(RelaxationFit {
            a1: d.params[i1].exp(),
            a2: d.params[j1].exp(),
            tau1: d.params[i2].exp(),
            tau2: d.params[j2].exp(),
            floor: d.params[4].exp(),
            a1_error: d.params[i1].exp() * d.std_error(i1),
            a2_error: d.params[j1].exp() * d.std_error(j1),
            tau1_error: d.params[i2].exp() * d.std_error(i2),
            tau2_error: d.params[j2].exp() * d.std_error(j2),
            plateau,
            residual_norm: d.cost.sqrt(),
            degenerate: false,
        });
    }
    if !s.converged {
        return Err(Error::FitFailed { reason: "relaxation fit did not converge".into(), residual: s.cost.sqrt() });
    }
    let (a, tau) = (s.params[0].exp(), s.params[1].exp());
    Ok(RelaxationFit {
        a1: a,
        a2: 0.0,
        tau1: tau,
        tau2: tau,
        floor: s.params[2].exp(),
        a1_error: a * s.std_error(0),
        a2_error: 0.0,
        tau1_error: tau * s.std_error(1),
        tau2_error: tau * s.std_error(1),
        plateau,
        residual_norm: s.cost.sqrt(),
        degenerate: true,
    })
}
