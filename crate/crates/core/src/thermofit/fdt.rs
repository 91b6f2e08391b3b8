//! Temperatures from fluctuation-dissipation relations.

use faer::c64;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use crate::correlators::CorrelatorSpectrum;
use crate::error::{Error, Result};

/// Ratios below `1 - RATIO_TOLERANCE` imply a negative occupation.
pub const RATIO_TOLERANCE: f64 = 1e-6;
pub const MIN_FDT_POINTS: usize = 5;
pub const DEFAULT_FDT_WINDOW: (f64, f64) = (2.0, 60.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdtOccupation {
    /// `i K / A`, nominally `2 n + 1`.
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub ratio: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub occupation: f64,
    /// Set when the ratio implies a negative occupation (reported, not clamped).
    pub unphysical: bool,
}

/// Inverts `i G^K = A (2 n + 1)` for the line weights of one level.
pub fn occupation_from_fdt(keldysh_weight: c64, spectral_weight: c64) -> Result<FdtOccupation> {
    if spectral_weight.norm() == 0.0 || !spectral_weight.re.is_finite() {
        return Err(Error::InvalidConfig("spectral weight must be nonzero".into()));
    }
    let ratio = (c64::new(0.0, 1.0) * keldysh_weight / spectral_weight).re;
    Ok(FdtOccupation { ratio, occupation: (ratio - 1.0) / 2.0, unphysical: ratio < 1.0 - RATIO_TOLERANCE })
}

pub fn bose_einstein(energy: f64, temperature: f64) -> f64 {
    1.0 / (energy / temperature).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BosePoint {
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub energy: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub occupation: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub temperature: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub temperature_error: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub beta: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub beta_error: f64,
    pub window: Option<(f64, f64)>,
    pub points: usize,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub residual_norm: f64,
    /// Residuals divided by the point uncertainties (Bose-Einstein fits).
    #[serde(deserialize_with = "super::nullable::vec_or_nan")]
    pub normalized_residuals: Vec<f64>,
    pub converged: bool,
    pub not_thermal: bool,
}

/// Weighted single-parameter least squares of `n_B(E, T)` through the points.
pub fn fit_bose_einstein(points: &[BosePoint], lm: &LmOptions) -> Result<TemperatureFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: points.len() });
    }
    for p in points {
        if !(p.energy > 0.0) || !(p.sigma > 0.0) || !p.occupation.is_finite() {
            return Err(Error::InvalidConfig(format!("bad Bose-Einstein point {p:?}")));
        }
    }
    if points.iter().all(|p| p.occupation <= 0.0) {
        return Err(Error::FitFailed { reason: "all occupations are nonpositive".into(), residual: f64::NAN });
    }
    // Per-point inversions give the starting temperature.
    let mut guesses: Vec<f64> = points
        .iter()
        .filter(|p| p.occupation > 0.0)
        .map(|p| p.energy / (1.0 / p.occupation).ln_1p())
        .collect();
    guesses.sort_by(f64::total_cmp);
    let t0 = guesses[guesses.len() / 2];
    let model = |x: &[f64], r: &mut [f64]| {
        let t = x[0].exp();
        for (ri, p) in r.iter_mut().zip(points) {
            *ri = (bose_einstein(p.energy, t) - p.occupation) / p.sigma;
        }
    };
    let sol = levenberg_marquardt(&model, points.len(), &[t0.ln()], lm);
    if !sol.converged || !sol.cost.is_finite() {
        return Err(Error::FitFailed { reason: "Bose-Einstein fit did not converge".into(), residual: sol.cost.sqrt() });
    }
    let t = sol.params[0].exp();
    let t_err = t * sol.std_error(0);
    Ok(TemperatureFit {
        temperature: t,
        temperature_error: t_err,
        beta: 1.0 / t,
        beta_error: t_err / (t * t),
        window: None,
        points: points.len(),
        residual_norm: sol.cost.sqrt(),
        normalized_residuals: sol.residuals.clone(),
        converged: true,
        not_thermal: false,
    })
}

/// Fits `ln f(E) - ln r(E) + beta E = 0` over energies in `window` where both
/// spectra are positive, with weights proportional to `min(f, r)`.
pub fn fit_fdt_beta(forward: &CorrelatorSpectrum, reversed: &CorrelatorSpectrum, window: (f64, f64)) -> Result<TemperatureFit> {
    if forward.energies != reversed.energies {
        return Err(Error::GridMismatch("FDT spectra lie on different energy grids".into()));
    }
    let grid = forward.energies;
    let (lo, hi) = window;
    if !(lo < hi) || lo < grid.start() - 1e-9 || hi > grid.energy(grid.len() - 1) + 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "window [{lo}, {hi}] outside energy grid [{}, {}]",
            grid.start(),
            grid.energy(grid.len() - 1)
        )));
    }
    let samples: Vec<(f64, f64, f64)> = (0..grid.len())
        .filter_map(|k| {
            let e = grid.energy(k);
            let (f, r) = (forward.values[k].re, reversed.values[k].re);
            (e >= lo && e <= hi && f > 0.0 && r > 0.0).then_some((e, f, r))
        })
        .collect();
    fit_log_ratio(&samples, Some(window))
}

/// Weighted closed-form solution over `(E, f, r)` samples.
pub fn fit_log_ratio(samples: &[(f64, f64, f64)], window: Option<(f64, f64)>) -> Result<TemperatureFit> {
    if samples.len() < MIN_FDT_POINTS {
        return Err(Error::InsufficientData { needed: MIN_FDT_POINTS, got: samples.len() });
    }
    let raw: Vec<f64> = samples.iter().map(|&(_, f, r)| f.min(r)).collect();
    let mean_w = raw.iter().sum::<f64>() / raw.len() as f64;
    let w: Vec<f64> = raw.iter().map(|x| x / mean_w).collect();
    let see: f64 = samples.iter().zip(&w).map(|(&(e, _, _), wi)| wi * e * e).sum();
    let sel: f64 = samples.iter().zip(&w).map(|(&(e, f, r), wi)| wi * e * (f.ln() - r.ln())).sum();
    if see == 0.0 {
        return Err(Error::FitFailed { reason: "all window energies are zero".into(), residual: f64::NAN });
    }
    let beta = -sel / see;
    let cost: f64 = samples.iter().zip(&w).map(|(&(e, f, r), wi)| wi * (f.ln() - r.ln() + beta * e).powi(2)).sum();
    let s2 = cost / (samples.len() - 1) as f64;
    let beta_error = (s2 / see).sqrt();
    let not_thermal = !(beta > 0.0);
    let temperature = if not_thermal { f64::INFINITY } else { 1.0 / beta };
    Ok(TemperatureFit {
        temperature,
        temperature_error: if not_thermal { f64::INFINITY } else { beta_error / (beta * beta) },
        beta,
        beta_error,
        window,
        points: samples.len(),
        residual_norm: cost.sqrt(),
        normalized_residuals: Vec::new(),
        converged: true,
        not_thermal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupation_inversion() {
        let a = c64::new(0.7, 0.0);
        let three = occupation_from_fdt(c64::new(0.0, -2.1), a).unwrap();
        assert!((three.occupation - 1.0).abs() < 1e-15 && !three.unphysical);
        let one = occupation_from_fdt(c64::new(0.0, -0.7), a).unwrap();
        assert!(one.occupation.abs() < 1e-15);
        let neg = occupation_from_fdt(c64::new(0.0, -0.35), a).unwrap();
        assert!(neg.unphysical && neg.occupation < 0.0);
        assert!(occupation_from_fdt(c64::new(0.0, 1.0), c64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn exact_bose_points() {
        let t0 = 50.0;
        let pts: Vec<BosePoint> = [3.0, 11.0, 19.0, 32.0, 41.0]
            .iter()
            .map(|&e| BosePoint { energy: e, occupation: bose_einstein(e, t0), sigma: 0.1 })
            .collect();
        let fit = fit_bose_einstein(&pts, &LmOptions::default()).unwrap();
        assert!((fit.temperature - t0).abs() <= 1e-6 * t0);
    }

    #[test]
    fn inconsistent_points_still_fit() {
        let pts = [
            BosePoint { energy: 10.0, occupation: bose_einstein(10.0, 20.0), sigma: 0.01 },
            BosePoint { energy: 20.0, occupation: bose_einstein(20.0, 80.0), sigma: 0.01 },
        ];
        let fit = fit_bose_einstein(&pts, &LmOptions::default()).unwrap();
        assert!(fit.temperature > 20.0 && fit.temperature < 80.0);
        assert!(fit.residual_norm > 10.0);
    }

    #[test]
    fn bose_rejects_bad_input() {
        let lm = LmOptions::default();
        assert!(fit_bose_einstein(&[BosePoint { energy: 1.0, occupation: 1.0, sigma: 1.0 }], &lm).is_err());
        let neg = [
            BosePoint { energy: 1.0, occupation: -1.0, sigma: 1.0 },
            BosePoint { energy: 2.0, occupation: -0.5, sigma: 1.0 },
        ];
        assert!(matches!(fit_bose_einstein(&neg, &lm), Err(Error::FitFailed { .. })));
    }

    #[test]
    fn log_ratio_exact_and_degenerate() {
        let beta = 1.0 / 200.0;
        let exact: Vec<(f64, f64, f64)> = (0..50)
            .map(|k| {
                let e = 2.0 + k as f64;
                let r = (-(e - 20.0).powi(2) / 50.0).exp();
                (e, r * (-beta * e).exp(), r)
            })
            .collect();
        let fit = fit_log_ratio(&exact, None).unwrap();
        assert!((fit.beta - beta).abs() <= 1e-4 * beta);
        let flat: Vec<(f64, f64, f64)> = exact.iter().map(|&(e, _, r)| (e, r, r)).collect();
        let fit = fit_log_ratio(&flat, None).unwrap();
        assert!(fit.not_thermal && fit.beta == 0.0);
        assert!(matches!(fit_log_ratio(&exact[..4], None), Err(Error::InsufficientData { .. })));
    }
}
