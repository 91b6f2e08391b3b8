//! Bipartition of the modes into an observed subsystem and a reservoir.
//!
//! At fixed total particle number the Hilbert space is a direct sum over the
//! subsystem particle count `k` of products (system with `k`) x (reservoir with
//! `N - k`). Tracing out the reservoir never couples different `k`, so the
//! reduced density matrix is block diagonal and each block is `C_k C_k^dagger`
//! for the amplitude matrix `C_k` of that sector.

use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::{c64, get_global_parallelism, Accum, Mat, MatRef};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, StateVector};
use crate::linalg::{self, ONE, ZERO};

/// Eigenvalues below this are treated as exact zeros in the entropy.
pub const ENTROPY_DROP: f64 = 1e-14;
/// More negative eigenvalues than this signal a corrupted density matrix.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

/// Occupation configurations of a group of modes, grouped by particle count.
#[derive(Debug, Clone)]
struct ConfigTable {
    sectors: Vec<FockBasis>,
    offsets: Vec<usize>,
}

impl ConfigTable {
    fn new(modes: usize, max_particles: usize) -> Result<Self> {
        let mut sectors = Vec::with_capacity(max_particles + 1);
        let mut offsets = vec![0];
        for k in 0..=max_particles {
            let b = FockBasis::with_cap(modes, k, usize::MAX)?;
            offsets.push(offsets[k] + b.dim());
            sectors.push(b);
        }
        Ok(Self { sectors, offsets })
    }

    fn len(&self) -> usize {
        *self.offsets.last().expect("offsets start at zero")
    }

    fn sector_len(&self, k: usize) -> usize {
        self.sectors[k].dim()
    }

    fn config(&self, index: usize) -> &[u32] {
        let k = self.offsets.partition_point(|&o| o <= index) - 1;
        self.sectors[k].state(index - self.offsets[k])
    }

    /// (particle count, index within that count).
    fn locate(&self, tuple: &[u32]) -> (usize, usize) {
        let k = tuple.iter().map(|&n| n as usize).sum::<usize>();
        let local = self.sectors[k].index_of(tuple).expect("tuple enumerated in its sector");
        (k, local)
    }
}

#[derive(Debug, Clone)]
pub struct PartitionMap {
    basis: Arc<FockBasis>,
    system_modes: Vec<usize>,
    reservoir_modes: Vec<usize>,
    system: ConfigTable,
    reservoir: ConfigTable,
    /// Per full-basis index: (system particle count, local system index, local reservoir index).
    labels: Vec<(u32, u32, u32)>,
}

/// Splits the modes of `basis` into `system_modes` (0-based) and the rest.
pub fn build_partition(basis: &Arc<FockBasis>, system_modes: &[usize]) -> Result<PartitionMap> {
    let m = basis.num_modes();
    let mut system: Vec<usize> = system_modes.to_vec();
    system.sort_unstable();
    system.dedup();
    if system.len() != system_modes.len() {
        return Err(Error::InvalidPartition(format!("repeated mode in {system_modes:?}")));
    }
    if system.is_empty() || system.len() >= m {
        return Err(Error::InvalidPartition(format!(
            "system must be a nonempty proper subset of {m} modes, got {system_modes:?}"
        )));
    }
    if let Some(&bad) = system.iter().find(|&&i| i >= m) {
        return Err(Error::InvalidMode { mode: bad, num_modes: m });
    }
    let reservoir: Vec<usize> = (0..m).filter(|i| !system.contains(i)).collect();
    let n = basis.num_particles();
    let sys_table = ConfigTable::new(system.len(), n)?;
    let res_table = ConfigTable::new(reservoir.len(), n)?;

    let mut labels = Vec::with_capacity(basis.dim());
    let mut s_tuple = vec![0u32; system.len()];
    let mut r_tuple = vec![0u32; reservoir.len()];
    for tuple in basis.states() {
        for (dst, &mode) in s_tuple.iter_mut().zip(&system) {
            *dst = tuple[mode];
        }
        for (dst, &mode) in r_tuple.iter_mut().zip(&reservoir) {
            *dst = tuple[mode];
        }
        let (k, s) = sys_table.locate(&s_tuple);
        let (kr, r) = res_table.locate(&r_tuple);
        debug_assert_eq!(k + kr, n);
        labels.push((k as u32, s as u32, r as u32));
    }
    Ok(PartitionMap {
        basis: basis.clone(),
        system_modes: system,
        reservoir_modes: reservoir,
        system: sys_table,
        reservoir: res_table,
        labels,
    })
}

impl PartitionMap {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn system_modes(&self) -> &[usize] {
        &self.system_modes
    }

    pub fn reservoir_modes(&self) -> &[usize] {
        &self.reservoir_modes
    }

    pub fn num_system_configs(&self) -> usize {
        self.system.len()
    }

    pub fn num_reservoir_configs(&self) -> usize {
        self.reservoir.len()
    }

    /// System occupations for global system index `s`, grouped by particle count.
    pub fn system_config(&self, s: usize) -> &[u32] {
        self.system.config(s)
    }

    pub fn reservoir_config(&self, r: usize) -> &[u32] {
        self.reservoir.config(r)
    }

    /// Global (system, reservoir) configuration indices of full-basis state `index`.
    pub fn label(&self, index: usize) -> (usize, usize) {
        let (k, s, r) = self.labels[index];
        let k = k as usize;
        let n = self.basis.num_particles();
        (self.system.offsets[k] + s as usize, self.reservoir.offsets[n - k] + r as usize)
    }

    /// `ln min(#system configs, #reservoir configs)`.
    pub fn entropy_bound(&self) -> f64 {
        (self.num_system_configs().min(self.num_reservoir_configs()) as f64).ln()
    }

    /// Diagonal operator on system configurations counting particles in `modes`
    /// (0-based full-system indices, each of which must be a system mode).
    pub fn system_number_operator(&self, modes: &[usize]) -> Result<Mat<c64>> {
        let mut slots = Vec::with_capacity(modes.len());
        for &m in modes {
            let slot = self
                .system_modes
                .iter()
                .position(|&x| x == m)
                .ok_or_else(|| Error::InvalidPartition(format!("mode {m} is not in the system")))?;
            slots.push(slot);
        }
        let d = self.num_system_configs();
        let diag: Vec<f64> = (0..d)
            .map(|s| {
                let cfg = self.system_config(s);
                slots.iter().map(|&k| cfg[k] as f64).sum()
            })
            .collect();
        Ok(Mat::from_fn(d, d, |i, j| if i == j { c64::new(diag[i], 0.0) } else { ZERO }))
    }
}

/// Block-diagonal `rho_S`, one block per subsystem particle count.
#[derive(Debug, Clone)]
pub struct ReducedDensityMatrix {
    offsets: Vec<usize>,
    blocks: Vec<Mat<c64>>,
}

/// Partial trace over the reservoir of a normalized pure state.
pub fn reduced_density(psi: &StateVector, pm: &PartitionMap) -> Result<ReducedDensityMatrix> {
    if psi.basis().num_particles() != pm.basis.num_particles() || psi.basis().dim() != pm.basis.dim() {
        return Err(Error::SectorMismatch { expected: pm.basis.num_particles(), found: psi.basis().num_particles() });
    }
    if !psi.is_normalized() {
        return Err(Error::Integrity(format!("state norm is {}", psi.norm())));
    }
    let n = pm.basis.num_particles();
    let mut coeffs: Vec<Mat<c64>> =
        (0..=n).map(|k| Mat::zeros(pm.system.sector_len(k), pm.reservoir.sector_len(n - k))).collect();
    for (&(k, s, r), &a) in pm.labels.iter().zip(psi.amplitudes()) {
        coeffs[k as usize][(s as usize, r as usize)] = a;
    }
    let blocks = coeffs
        .iter()
        .map(|c| {
            let mut rho = Mat::zeros(c.nrows(), c.nrows());
            if c.ncols() > 0 {
                matmul(&mut rho, Accum::Replace, c.as_ref(), c.adjoint(), ONE, get_global_parallelism());
            }
            rho
        })
        .collect();
    Ok(ReducedDensityMatrix { offsets: pm.system.offsets.clone(), blocks })
}

impl ReducedDensityMatrix {
    pub fn dim(&self) -> usize {
        *self.offsets.last().expect("offsets start at zero")
    }

    pub fn blocks(&self) -> &[Mat<c64>] {
        &self.blocks
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| (0..b.nrows()).map(|i| b[(i, i)].re).sum::<f64>()).sum()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let d = self.dim();
        let mut out = Mat::zeros(d, d);
        for (k, b) in self.blocks.iter().enumerate() {
            let o = self.offsets[k];
            for j in 0..b.ncols() {
                for i in 0..b.nrows() {
                    out[(o + i, o + j)] = b[(i, j)];
                }
            }
        }
        out
    }

    pub fn purity(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (0..b.ncols()).map(|j| b.col(j).iter().map(|x| x.norm_sqr()).sum::<f64>()).sum::<f64>())
            .sum()
    }

    /// All eigenvalues of the Hermitized blocks, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut all = Vec::with_capacity(self.dim());
        for b in self.blocks.iter().filter(|b| b.nrows() > 0) {
            all.extend(linalg::hermitian_eigenvalues(linalg::hermitize(b.as_ref()).as_ref())?);
        }
        all.sort_by(f64::total_cmp);
        Ok(all)
    }
}

/// Von Neumann entropy in nats.
pub fn entanglement_entropy(rho: &ReducedDensityMatrix) -> Result<f64> {
    entropy_of_spectrum(&rho.eigenvalues()?)
}

/// Von Neumann entropy of any dense density matrix.
pub fn von_neumann_entropy(rho: MatRef<'_, c64>) -> Result<f64> {
    entropy_of_spectrum(&linalg::hermitian_eigenvalues(linalg::hermitize(rho).as_ref())?)
}

fn entropy_of_spectrum(eigenvalues: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigenvalues {
        if l < -NEGATIVITY_TOLERANCE {
            return Err(Error::Integrity(format!("density matrix eigenvalue {l:e} is negative")));
        }
        if l >= ENTROPY_DROP {
            s -= l * l.ln();
        }
    }
    Ok(s)
}

/// `tr(rho_S A)` for `A` indexed by system configurations.
pub fn subsystem_expectation(rho: &ReducedDensityMatrix, op: MatRef<'_, c64>) -> Result<c64> {
    let d = rho.dim();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::ShapeMismatch(format!("operator is {}x{}, system space is {d}", op.nrows(), op.ncols())));
    }
    let mut acc = ZERO;
    for (k, b) in rho.blocks.iter().enumerate() {
        let o = rho.offsets[k];
        for j in 0..b.ncols() {
            for i in 0..b.nrows() {
                acc += b[(i, j)] * op[(o + j, o + i)];
            }
        }
    }
    Ok(acc)
}
