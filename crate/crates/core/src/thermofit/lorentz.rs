//! Multi-peak Lorentzian decomposition of a real spectrum.

use serde::{Deserialize, Serialize};

use super::lm::{multistart, FitOptions};
use crate::correlators::CorrelatorSpectrum;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub center: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub half_width: f64,
    /// Integrated line strength.
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub weight: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub center_error: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub half_width_error: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub weight_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    /// Ascending in center.
    pub peaks: Vec<Peak>,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub residual_norm: f64,
    pub converged: bool,
    /// Covariance of `(center, ln half_width, weight)` per peak, flattened in
    /// that order before sorting.
    pub covariance: Option<Vec<Vec<f64>>>,
}

/// Unit-weight Lorentzian line shape.
pub fn lorentzian(e: f64, center: f64, half_width: f64) -> f64 {
    half_width / std::f64::consts::PI / ((e - center).powi(2) + half_width * half_width)
}

/// Level energies `k * spacing` for `k = 0 .. count`.
pub fn default_seeds(count: usize, level_spacing: f64) -> Vec<f64> {
    (0..count).map(|k| k as f64 * level_spacing).collect()
}

/// Fits `sum_i w_i L(E; E_i, gamma_i)` to `(energies, values)`.
pub fn fit_lorentzian_points(energies: &[f64], values: &[f64], seeds: &[f64], opts: &FitOptions) -> Result<PeakSet> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("peak count must be at least 1".into()));
    }
    if energies.len() != values.len() {
        return Err(Error::ShapeMismatch(format!("{} energies, {} values", energies.len(), values.len())));
    }
    if energies.len() < 3 * seeds.len() + 1 {
        return Err(Error::InsufficientData { needed: 3 * seeds.len() + 1, got: energies.len() });
    }
    let step = (energies[energies.len() - 1] - energies[0]).abs() / (energies.len() - 1).max(1) as f64;
    let nearest = |e: f64| {
        energies
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs()))
            .map_or(0, |(k, _)| k)
    };
    let gamma0 = (5.0 * step).max(0.1);
    let mut x0 = Vec::with_capacity(3 * seeds.len());
    let mut spread = Vec::with_capacity(3 * seeds.len());
    for &s in seeds {
        // Seed each peak at the local maximum within a couple of widths.
        let lo = s - 2.0;
        let hi = s + 2.0;
        let (mut best_e, mut best_v) = (s, values[nearest(s)]);
        for (e, v) in energies.iter().zip(values) {
            if *e >= lo && *e <= hi && v.abs() > best_v.abs() {
                best_e = *e;
                best_v = *v;
            }
        }
        x0.extend([best_e, gamma0.ln(), best_v * std::f64::consts::PI * gamma0]);
        spread.extend([gamma0, 0.7, 0.3 * (best_v * std::f64::consts::PI * gamma0).abs()]);
    }
    let model = |p: &[f64], r: &mut [f64]| {
        for ((ri, &e), &y) in r.iter_mut().zip(energies).zip(values) {
            let mut m = 0.0;
            for peak in p.chunks_exact(3) {
                m += peak[2] * lorentzian(e, peak[0], peak[1].exp());
            }
            *ri = m - y;
        }
    };
    let sol = multistart(&model, energies.len(), &x0, &spread, opts);
    if !sol.cost.is_finite() {
        return Err(Error::FitFailed { reason: "Lorentzian residual is not finite".into(), residual: sol.cost });
    }
    if !sol.converged {
        return Err(Error::FitFailed { reason: "Lorentzian fit did not converge".into(), residual: sol.cost.sqrt() });
    }
    let mut peaks: Vec<Peak> = sol
        .params
        .chunks_exact(3)
        .enumerate()
        .map(|(k, p)| {
            let gamma = p[1].exp();
            Peak {
                center: p[0],
                half_width: gamma,
                weight: p[2],
                center_error: sol.std_error(3 * k),
                half_width_error: gamma * sol.std_error(3 * k + 1),
                weight_error: sol.std_error(3 * k + 2),
            }
        })
        .collect();
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok(PeakSet { peaks, residual_norm: sol.cost.sqrt(), converged: sol.converged, covariance: sol.covariance })
}

/// Fits the real part of `spectrum`, normalized so that an isolated line of
/// unit strength has unit area (window-mass corrected), restricted to `range`.
pub fn fit_lorentzians(
    spectrum: &CorrelatorSpectrum,
    seeds: &[f64],
    range: Option<(f64, f64)>,
    opts: &FitOptions,
) -> Result<PeakSet> {
    let norm = std::f64::consts::TAU * spectrum.window_peak;
    let (lo, hi) = range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let (energies, values): (Vec<f64>, Vec<f64>) = (0..spectrum.values.len())
        .map(|k| (spectrum.energies.energy(k), spectrum.values[k].re / norm))
        .filter(|(e, _)| *e >= lo && *e <= hi)
        .unzip();
    fit_lorentzian_points(&energies, &values, seeds, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synth(peaks: &[(f64, f64, f64)], noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let es: Vec<f64> = (0..=800).map(|k| -10.0 + k as f64 * 0.05).collect();
        let ys = es
            .iter()
            .map(|&e| {
                let y: f64 = peaks.iter().map(|&(c, g, w)| w * lorentzian(e, c, g)).sum();
                y * (1.0 + noise * (2.0 * rng.random::<f64>() - 1.0))
            })
            .collect();
        (es, ys)
    }

    #[test]
    fn single_peak_with_noise() {
        let (es, ys) = synth(&[(10.0, 0.5, 1.0)], 0.01, 1);
        let fit = fit_lorentzian_points(&es, &ys, &[10.0], &FitOptions::default()).unwrap();
        let p = fit.peaks[0];
        assert!((p.center - 10.0).abs() < 0.03 * 10.0);
        assert!((p.half_width - 0.5).abs() < 0.03 * 0.5);
        assert!((p.weight - 1.0).abs() < 0.03);
    }

    #[test]
    fn two_separated_peaks() {
        let (es, ys) = synth(&[(0.0, 0.4, 2.0), (12.0, 0.6, 0.7)], 0.0, 2);
        let fit = fit_lorentzian_points(&es, &ys, &[1.0, 11.0], &FitOptions::default()).unwrap();
        assert!((fit.peaks[0].center - 0.0).abs() < 0.04);
        assert!((fit.peaks[1].center - 12.0).abs() < 0.06);
        assert!((fit.peaks[0].weight - 2.0).abs() < 1e-4 * 2.0);
        assert!((fit.peaks[1].weight - 0.7).abs() < 1e-4 * 0.7);
    }

    #[test]
    fn rejects_empty_seed_list() {
        let (es, ys) = synth(&[(0.0, 0.4, 2.0)], 0.0, 3);
        assert!(fit_lorentzian_points(&es, &ys, &[], &FitOptions::default()).is_err());
    }
}
