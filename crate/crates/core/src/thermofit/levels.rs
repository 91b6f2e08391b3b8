//! Per-level occupations from the dominant line of `A_ii` and `i G^K_ii`.

use faer::c64;
use serde::{Deserialize, Serialize};

use super::fdt::{occupation_from_fdt, BosePoint};
use super::lm::FitOptions;
use super::lorentz::{fit_lorentzians, Peak};
use crate::correlators::CorrelatorSpectrum;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelOccupation {
    /// Center of the spectral-function line.
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub energy: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub occupation: f64,
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub sigma: f64,
    /// `i K / A` line-strength ratio.
    #[serde(deserialize_with = "super::nullable::f64_or_nan")]
    pub ratio: f64,
    pub unphysical: bool,
    pub spectral: Peak,
    pub keldysh: Peak,
}

impl LevelOccupation {
    pub fn bose_point(&self) -> BosePoint {
        BosePoint { energy: self.energy, occupation: self.occupation, sigma: self.sigma }
    }
}

/// Fits one Lorentzian to each spectrum within `half_window` of the tallest
/// point of `Re A` and inverts `i G^K = A (2 n + 1)` for the line strengths.
pub fn level_occupation(
    keldysh: &CorrelatorSpectrum,
    spectral: &CorrelatorSpectrum,
    half_window: f64,
    opts: &FitOptions,
) -> Result<LevelOccupation> {
    if keldysh.energies != spectral.energies {
        return Err(Error::GridMismatch("Keldysh and spectral functions lie on different grids".into()));
    }
    let peak_idx = spectral
        .values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .map(|(k, _)| k)
        .ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    let center = spectral.energies.energy(peak_idx);
    let range = Some((center - half_window, center + half_window));

    let a = fit_lorentzians(spectral, &[center], range, opts)?.peaks[0];
    // i G^K is real and positive for a stable level.
    let mut rotated = keldysh.clone();
    for v in &mut rotated.values {
        *v *= c64::new(0.0, 1.0);
    }
    let k = fit_lorentzians(&rotated, &[a.center], range, opts)?.peaks[0];
    for (name, p) in [("spectral", a), ("Keldysh", k)] {
        if !(p.weight > 0.0) || (p.center - center).abs() > half_window {
            return Err(Error::FitFailed {
                reason: format!("{name} line near E = {center} has weight {} at {}", p.weight, p.center),
                residual: f64::NAN,
            });
        }
    }

    let fdt = occupation_from_fdt(c64::new(0.0, -k.weight), c64::new(a.weight, 0.0))?;
    let rel = ((k.weight_error / k.weight).powi(2) + (a.weight_error / a.weight).powi(2)).sqrt();
    let sigma = 0.5 * fdt.ratio.abs() * rel;
    let sigma = if sigma.is_finite() && sigma > 0.0 { sigma } else { f64::EPSILON * fdt.ratio.abs().max(1.0) };
    Ok(LevelOccupation {
        energy: a.center,
        occupation: fdt.occupation,
        sigma,
        ratio: fdt.ratio,
        unphysical: fdt.unphysical,
        spectral: a,
        keldysh: k,
    })
}
