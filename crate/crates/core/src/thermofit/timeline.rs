//! Temperature as a function of center-of-motion time.

use serde::{Deserialize, Serialize};

use super::fdt::{fit_fdt_beta, TemperatureFit};
use crate::correlators::CorrelatorSpectrum;

/// Spectra at one center-of-motion time, ordered as `fit_fdt_beta` expects:
/// `numerator = e^{-beta E} denominator` in equilibrium.
#[derive(Debug, Clone)]
pub struct FdtSample {
    pub com_time: f64,
    pub label: String,
    pub numerator: CorrelatorSpectrum,
    pub denominator: CorrelatorSpectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub com_time: f64,
    pub label: String,
    pub fit: Option<TemperatureFit>,
    /// Why no usable temperature exists at this time.
    pub gap: Option<String>,
}

/// One fit per sample; failures and non-thermal fits become gaps instead of
/// aborting the timeline.
pub fn temperature_timeline(samples: &[FdtSample], window: (f64, f64)) -> Vec<TimelineEntry> {
    samples
        .iter()
        .map(|s| {
            let (fit, gap) = match fit_fdt_beta(&s.numerator, &s.denominator, window) {
                Ok(f) if f.not_thermal => (Some(f), Some("not thermal: fitted beta <= 0".to_string())),
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TimelineEntry { com_time: s.com_time, label: s.label.clone(), fit, gap }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlators::{CorrelatorKind, EnergyGrid, WindowKind};
    use faer::c64;

    fn spectrum(grid: EnergyGrid, f: impl Fn(f64) -> f64) -> CorrelatorSpectrum {
        CorrelatorSpectrum {
            kind: CorrelatorKind::DensityReversed,
            com_time: 0.0,
            energies: grid,
            values: grid.energies().iter().map(|&e| c64::new(f(e), 0.0)).collect(),
            window: WindowKind::Hann,
            window_peak: 1.0,
        }
    }

    #[test]
    fn gaps_instead_of_failures() {
        let grid = EnergyGrid::new(0.0, 70.0, 0.5).unwrap();
        let beta = 0.05;
        let base = |e: f64| (-(e - 30.0).powi(2) / 200.0).exp();
        let good = FdtSample {
            com_time: 10.0,
            label: "a".into(),
            numerator: spectrum(grid, |e| base(e) * (-beta * e).exp()),
            denominator: spectrum(grid, base),
        };
        let empty = FdtSample {
            com_time: 1.0,
            label: "a".into(),
            numerator: spectrum(grid, |_| -1.0),
            denominator: spectrum(grid, base),
        };
        let line = temperature_timeline(&[empty, good], (2.0, 60.0));
        assert!(line[0].fit.is_none() && line[0].gap.is_some());
        let fit = line[1].fit.as_ref().unwrap();
        assert!((fit.beta - beta).abs() < 1e-10 && line[1].gap.is_none());
    }
}
