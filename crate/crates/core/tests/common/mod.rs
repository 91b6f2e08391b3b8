//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use bathgen::fock::{FockBasis, StateVector};
use bathgen::hamiltonian::{HamiltonianParams, SectorOperator};
use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Box-Muller standard normal.
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A one-particle sector over `dim` modes, used as a plain `dim`-dimensional space.
pub fn plain_space(dim: usize) -> Arc<FockBasis> {
    Arc::new(FockBasis::new(dim, 1).unwrap())
}

/// GUE-like Hermitian matrix with spectrum rescaled into roughly `[-1, 1]`.
pub fn random_hermitian(dim: usize, seed: u64) -> SectorOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Mat::<c64>::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = c64::new(normal(&mut rng), 0.0);
        for j in 0..i {
            let z = c64::new(normal(&mut rng), normal(&mut rng)) / std::f64::consts::SQRT_2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    // Semicircle radius is about 2 sqrt(dim).
    let scale = 1.0 / (2.0 * (dim as f64).sqrt());
    for j in 0..dim {
        for i in 0..dim {
            m[(i, j)] *= scale;
        }
    }
    SectorOperator::new(plain_space(dim), m).unwrap()
}

pub fn random_state(basis: &Arc<FockBasis>, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..basis.dim()).map(|_| c64::new(normal(&mut rng), normal(&mut rng))).collect();
    StateVector::new(basis.clone(), amps).unwrap().normalized()
}

pub fn model(m: usize, n: usize) -> HamiltonianParams {
    HamiltonianParams { level_spacing: 10.0, hopping: 1.0, intra: 1.0, inter: 0.1, num_modes: m, num_particles: n }
}

pub fn max_diff(a: &[c64], b: &[c64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
