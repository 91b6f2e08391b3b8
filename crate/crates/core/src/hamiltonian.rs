//! Trapped-boson Hamiltonian on one particle-number sector, its dense
//! eigendecomposition, and the adjacent-gap ratio chaos diagnostic.
//!
//! ```text
//! H = D sum_i (i-1) n_i + J sum_{i!=j} b_i^+ b_j + U sum_i b_i^+ b_i^+ b_i b_i
//!     + U' sum_{(i,j,l,m) not all equal} b_i^+ b_j^+ b_l b_m
//! ```
//!
//! The inter-level sum runs over every ordered quadruple; no symmetry
//! reduction of repeated index permutations is applied.

use std::sync::Arc;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{annihilate_in_place, create_in_place, FockBasis};
use crate::linalg;

/// Model couplings. Energies are in units of the hopping `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    pub level_spacing: f64,
    pub hopping: f64,
    pub intra: f64,
    pub inter: f64,
    pub num_modes: usize,
    pub num_particles: usize,
}

impl HamiltonianParams {
    /// `D/J = 10, U/J = 1, U'/J = 0.1` on five levels.
    pub fn standard(num_particles: usize) -> Self {
        Self { level_spacing: 10.0, hopping: 1.0, intra: 1.0, inter: 0.1, num_modes: 5, num_particles }
    }

    pub fn with_particles(self, num_particles: usize) -> Self {
        Self { num_particles, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("level_spacing", self.level_spacing),
            ("hopping", self.hopping),
            ("intra", self.intra),
            ("inter", self.inter),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if self.hopping <= 0.0 {
            return Err(Error::InvalidConfig("hopping J must be positive".into()));
        }
        if self.num_modes == 0 {
            return Err(Error::InvalidConfig("at least one mode is required".into()));
        }
        Ok(())
    }
}

/// Emits every `(target tuple, matrix element)` produced by `H` acting on the
/// occupation state `tuple`. Targets may repeat; callers accumulate.
pub fn hamiltonian_terms(params: &HamiltonianParams, tuple: &[u32], mut emit: impl FnMut(&[u32], f64)) {
    let m = tuple.len();
    let mut scratch = tuple.to_vec();

    let diag: f64 = tuple
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let n = f64::from(n);
            params.level_spacing * i as f64 * n + params.intra * n * (n - 1.0)
        })
        .sum();
    if diag != 0.0 {
        emit(tuple, diag);
    }

    if params.hopping != 0.0 {
        for i in 0..m {
            for j in (0..m).filter(|&j| j != i) {
                scratch.copy_from_slice(tuple);
                if let Some(a) = annihilate_in_place(&mut scratch, j) {
                    let c = create_in_place(&mut scratch, i);
                    emit(&scratch, params.hopping * a * c);
                }
            }
        }
    }

    if params.inter != 0.0 {
        for i in 0..m {
            for j in 0..m {
                for l in 0..m {
                    for q in 0..m {
                        if i == j && j == l && l == q {
                            continue;
                        }
                        scratch.copy_from_slice(tuple);
                        let Some(a1) = annihilate_in_place(&mut scratch, q) else { continue };
                        let Some(a2) = annihilate_in_place(&mut scratch, l) else { continue };
                        let c1 = create_in_place(&mut scratch, j);
                        let c2 = create_in_place(&mut scratch, i);
                        emit(&scratch, params.inter * a1 * a2 * c1 * c2);
                    }
                }
            }
        }
    }
}

/// Dense Hermitian operator on one sector.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    basis: Arc<FockBasis>,
    matrix: Mat<c64>,
}

impl SectorOperator {
    pub fn new(basis: Arc<FockBasis>, matrix: Mat<c64>) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix on a basis of dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                basis.dim()
            )));
        }
        Ok(Self { basis, matrix })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn max_element(&self) -> f64 {
        linalg::max_abs(self.matrix.as_ref())
    }

    /// Fails unless `max|H - H^dagger| <= 1e-12 max|H|`.
    pub fn check_hermitian(&self) -> Result<()> {
        let dev = linalg::hermiticity_deviation(self.matrix.as_ref());
        if dev > 1e-12 * self.max_element().max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(())
    }

    /// `<psi|O|psi>`.
    pub fn expectation(&self, psi: &[c64]) -> c64 {
        linalg::dot(psi, &linalg::mat_vec(self.matrix.as_ref(), psi))
    }

    pub fn shifted(&self, c: f64) -> Self {
        let mut matrix = self.matrix.clone();
        for k in 0..matrix.nrows() {
            matrix[(k, k)] += c64::new(c, 0.0);
        }
        Self { basis: self.basis.clone(), matrix }
    }
}

/// Assembles `H` column by column by acting on each basis tuple.
pub fn build_hamiltonian(params: &HamiltonianParams, basis: &Arc<FockBasis>) -> Result<SectorOperator> {
    params.validate()?;
    if basis.num_modes() != params.num_modes || basis.num_particles() != params.num_particles {
        return Err(Error::SectorMismatch { expected: params.num_particles, found: basis.num_particles() });
    }
    let dim = basis.dim();
    let mut matrix = Mat::<c64>::zeros(dim, dim);
    for (col, tuple) in basis.states().enumerate() {
        hamiltonian_terms(params, tuple, |target, amp| {
            let row = basis.index_of(target).expect("H conserves particle number");
            matrix[(row, col)] += c64::new(amp, 0.0);
        });
    }
    let op = SectorOperator::new(basis.clone(), matrix)?;
    op.check_hermitian()?;
    Ok(op)
}

/// Ascending eigenvalues and the unitary whose columns are the eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    basis: Arc<FockBasis>,
    values: Vec<f64>,
    vectors: Mat<c64>,
}

impl EigenSystem {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> MatRef<'_, c64> {
        self.vectors.as_ref()
    }

    pub fn vector(&self, k: usize) -> Vec<c64> {
        linalg::col_to_vec(self.vectors.as_ref(), k)
    }

    /// Overlaps `<E_k|psi>` for every eigenstate.
    pub fn coefficients(&self, psi: &[c64]) -> Vec<c64> {
        (0..self.values.len())
            .map(|k| self.vectors.col(k).iter().zip(psi).fold(linalg::ZERO, |acc, (v, p)| acc + v.conj() * p))
            .collect()
    }

    /// `sum_k c_k |E_k>`.
    pub fn synthesize(&self, coefficients: &[c64]) -> Vec<c64> {
        linalg::mat_vec(self.vectors.as_ref(), coefficients)
    }

    /// Exact propagation `V exp(-i E t) V^dagger psi`.
    pub fn evolve(&self, psi: &[c64], t: f64) -> Vec<c64> {
        let coeffs: Vec<c64> = self
            .coefficients(psi)
            .into_iter()
            .zip(&self.values)
            .map(|(c, &e)| c * c64::cis(-e * t))
            .collect();
        self.synthesize(&coeffs)
    }

    /// `max |H - V diag(E) V^dagger|`.
    pub fn reconstruction_residual(&self, h: MatRef<'_, c64>) -> f64 {
        let n = self.values.len();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * self.values[j]);
        let vh = self.vectors.adjoint().to_owned();
        let rebuilt = linalg::mul(scaled.as_ref(), vh.as_ref());
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((rebuilt[(i, j)] - h[(i, j)]).norm());
            }
        }
        worst
    }
}

pub fn diagonalize(op: &SectorOperator) -> Result<EigenSystem> {
    op.check_hermitian()?;
    let (values, vectors) = linalg::hermitian_eigen(op.matrix())?;
    Ok(EigenSystem { basis: op.basis().clone(), values, vectors })
}

/// Mean adjacent-gap ratio of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    pub mean_r: f64,
    pub ratios_used: usize,
    /// Levels folded into a neighbour because their gap fell below
    /// `1e-12` of the spectral width.
    pub merged_levels: usize,
}

pub fn r_ratio(eigenvalues: &[f64]) -> Result<ChaosReport> {
    r_ratio_window(eigenvalues, None)
}

/// Adjacent-gap ratio restricted to levels inside `window` (inclusive).
pub fn r_ratio_window(eigenvalues: &[f64], window: Option<(f64, f64)>) -> Result<ChaosReport> {
    let levels: Vec<f64> = match window {
        Some((lo, hi)) => eigenvalues.iter().copied().filter(|e| (lo..=hi).contains(e)).collect(),
        None => eigenvalues.to_vec(),
    };
    if levels.len() < 3 {
        return Err(Error::TooFewLevels { needed: 3, got: levels.len() });
    }
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("eigenvalues must be sorted ascending".into()));
    }
    let width = levels[levels.len() - 1] - levels[0];
    let tol = 1e-12 * width;
    let mut distinct = Vec::with_capacity(levels.len());
    let mut merged = 0;
    for &e in &levels {
        match distinct.last() {
            Some(&last) if e - last <= tol => merged += 1,
            _ => distinct.push(e),
        }
    }
    if distinct.len() < 3 {
        return Err(Error::TooFewLevels { needed: 3, got: distinct.len() });
    }
    let gaps: Vec<f64> = distinct.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = gaps.windows(2).map(|g| g[0].min(g[1]) / g[0].max(g[1])).collect();
    let mean_r = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(ChaosReport { mean_r, ratios_used: ratios.len(), merged_levels: merged })
}
