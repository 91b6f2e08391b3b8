//! Initial states and their energy distributions.

use std::sync::Arc;

use faer::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, StateVector};
use crate::hamiltonian::EigenSystem;
use crate::linalg::ONE;

pub const DEFAULT_SPECTRUM_THRESHOLD: f64 = 1e-12;

/// Fock state with the given occupations.
pub fn occupation_state(basis: &Arc<FockBasis>, occupations: &[u32]) -> Result<StateVector> {
    if occupations.len() != basis.num_modes() {
        return Err(Error::InvalidTuple(format!(
            "{occupations:?} has {} entries, expected {}",
            occupations.len(),
            basis.num_modes()
        )));
    }
    let total: u64 = occupations.iter().map(|&n| n as u64).sum();
    if total != basis.num_particles() as u64 {
        return Err(Error::InvalidTuple(format!(
            "{occupations:?} holds {total} particles, sector has {}",
            basis.num_particles()
        )));
    }
    let index = basis
        .index_of(occupations)
        .ok_or_else(|| Error::InvalidTuple(format!("{occupations:?} not in basis")))?;
    let mut psi = StateVector::zeros(basis.clone());
    psi.amplitudes_mut()[index] = ONE;
    Ok(psi)
}

/// Expansion phases of a microcanonical superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhaseChoice {
    #[default]
    Positive,
    Random { seed: u64 },
}

/// Equal-weight superposition of all eigenstates with energy in `[lo, hi]`.
pub fn microcanonical_state(eig: &EigenSystem, lo: f64, hi: f64, phases: PhaseChoice) -> Result<StateVector> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidConfig(format!("bad energy window [{lo}, {hi}]")));
    }
    let members: Vec<usize> = eig
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &e)| e >= lo && e <= hi)
        .map(|(k, _)| k)
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyWindow { lo, hi, nearest: nearest_levels(eig.values(), lo, hi) });
    }
    let amp = 1.0 / (members.len() as f64).sqrt();
    let mut rng = match phases {
        PhaseChoice::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        PhaseChoice::Positive => None,
    };
    let mut coefficients = vec![c64::new(0.0, 0.0); eig.values().len()];
    for &k in &members {
        coefficients[k] = match rng.as_mut() {
            Some(r) => c64::from_polar(amp, r.random::<f64>() * std::f64::consts::TAU),
            None => c64::new(amp, 0.0),
        };
    }
    StateVector::new(eig.basis().clone(), eig.synthesize(&coefficients))
}

/// Eigenvalue just below and just above the window.
fn nearest_levels(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let below = values.iter().copied().filter(|&e| e < lo).fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.max(e))));
    let above = values.iter().copied().filter(|&e| e > hi).fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.min(e))));
    below.into_iter().chain(above).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWeight {
    pub energy: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpectrum {
    /// Weights at or above the threshold, ascending in energy.
    pub levels: Vec<SpectralWeight>,
    pub mean_energy: f64,
    /// Root variance of the energy distribution.
    pub width: f64,
    pub total_weight: f64,
}

/// Energy distribution `|<E_a|psi>|^2`. Mean and width use all weights;
/// only the listing is thresholded (relative to the total weight).
pub fn state_spectrum(eig: &EigenSystem, psi: &StateVector, threshold: f64) -> Result<StateSpectrum> {
    if psi.basis().num_particles() != eig.basis().num_particles() || psi.basis().dim() != eig.basis().dim() {
        return Err(Error::SectorMismatch {
            expected: eig.basis().num_particles(),
            found: psi.basis().num_particles(),
        });
    }
    let weights: Vec<f64> = eig.coefficients(psi.amplitudes()).iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    let mean = weights.iter().zip(eig.values()).map(|(w, e)| w * e).sum::<f64>() / total;
    let var = weights.iter().zip(eig.values()).map(|(w, e)| w * (e - mean).powi(2)).sum::<f64>() / total;
    let levels = weights
        .iter()
        .zip(eig.values())
        .filter(|(&w, _)| w >= threshold * total)
        .map(|(&weight, &energy)| SpectralWeight { energy, weight })
        .collect();
    Ok(StateSpectrum { levels, mean_energy: mean, width: var.max(0.0).sqrt(), total_weight: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_hamiltonian, diagonalize, HamiltonianParams};
    use crate::linalg;

    fn small() -> (Arc<FockBasis>, EigenSystem, crate::hamiltonian::SectorOperator) {
        let params = HamiltonianParams::standard(3);
        let basis = Arc::new(FockBasis::new(5, 3).unwrap());
        let h = build_hamiltonian(&params, &basis).unwrap();
        let eig = diagonalize(&h).unwrap();
        (basis, eig, h)
    }

    #[test]
    fn ground_level_occupation() {
        let basis = Arc::new(FockBasis::new(5, 25).unwrap());
        let psi = occupation_state(&basis, &[25, 0, 0, 0, 0]).unwrap();
        assert_eq!(psi.amplitudes()[0], ONE);
        assert_eq!(psi.occupations(), vec![25.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(occupation_state(&basis, &[24, 0, 0, 0, 0]).is_err());
        assert!(occupation_state(&basis, &[25, 0, 0, 0]).is_err());
    }

    #[test]
    fn spectrum_mean_matches_expectation() {
        let (basis, eig, h) = small();
        let psi = occupation_state(&basis, &[3, 0, 0, 0, 0]).unwrap();
        let spec = state_spectrum(&eig, &psi, DEFAULT_SPECTRUM_THRESHOLD).unwrap();
        let direct = h.expectation(psi.amplitudes()).re;
        assert!((spec.mean_energy - direct).abs() <= 1e-10 * direct.abs());
        assert!((spec.total_weight - 1.0).abs() < 1e-10);
        assert!(spec.width > 0.0 && spec.width <= spec.mean_energy);
        assert!(spec.levels.windows(2).all(|w| w[0].energy <= w[1].energy));
    }

    #[test]
    fn eigenstate_and_two_level_superposition() {
        let (basis, eig, _) = small();
        let k = 7;
        let psi = StateVector::new(basis.clone(), eig.vector(k)).unwrap();
        let spec = state_spectrum(&eig, &psi, 1e-12).unwrap();
        assert_eq!(spec.levels.len(), 1);
        assert!((spec.levels[0].weight - 1.0).abs() < 1e-12);
        assert!(spec.width < 1e-6);

        let amp: Vec<c64> = eig.vector(2).iter().zip(eig.vector(9)).map(|(a, b)| (a + b) * (0.5f64).sqrt()).collect();
        let spec = state_spectrum(&eig, &StateVector::new(basis, amp).unwrap(), 1e-12).unwrap();
        assert_eq!(spec.levels.len(), 2);
        assert!(spec.levels.iter().all(|l| (l.weight - 0.5).abs() < 1e-12));
        let mid = 0.5 * (eig.values()[2] + eig.values()[9]);
        assert!((spec.mean_energy - mid).abs() < 1e-10);
    }

    #[test]
    fn microcanonical_window() {
        let (_, eig, _) = small();
        let v = eig.values();
        let (lo, hi) = (v[10] - 1e-9, v[14] + 1e-9);
        let psi = microcanonical_state(&eig, lo, hi, PhaseChoice::Positive).unwrap();
        assert!(psi.is_normalized());
        let spec = state_spectrum(&eig, &psi, 1e-12).unwrap();
        assert_eq!(spec.levels.len(), 5);
        assert!(spec.width <= (hi - lo) / 2.0);
        let coeffs = eig.coefficients(psi.amplitudes());
        assert!(coeffs[10..=14].iter().all(|c| (c.re - 1.0 / 5f64.sqrt()).abs() < 1e-12 && c.im.abs() < 1e-12));

        let randomized = microcanonical_state(&eig, lo, hi, PhaseChoice::Random { seed: 3 }).unwrap();
        let spec_r = state_spectrum(&eig, &randomized, 1e-12).unwrap();
        assert_eq!(spec_r.levels.len(), 5);
        assert!(linalg::dot(psi.amplitudes(), randomized.amplitudes()).norm() < 0.999);
    }

    #[test]
    fn empty_window_reports_neighbours() {
        let (_, eig, _) = small();
        let v = eig.values();
        let gap_mid = 0.5 * (v[0] + v[1]);
        match microcanonical_state(&eig, gap_mid, gap_mid, PhaseChoice::Positive) {
            Err(Error::EmptyWindow { nearest, .. }) => assert_eq!(nearest, vec![v[0], v[1]]),
            other => panic!("{other:?}"),
        }
    }
}
