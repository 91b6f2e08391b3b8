//! Long-time propagation by recursive powering of a short-time step.
//!
//! `U_0 = sum_{k <= k_max} (-i dt H)^k / k!` and `U_{r} = (U_{r-1})^n`, so rung
//! `r` advances by `n^r dt` and reaching exponentially long times costs a
//! linear number of matrix products. Any integer number of base steps is
//! reached by applying rungs largest-first according to its base-`n` digits.

use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::{c64, get_global_parallelism, Accum, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, StateVector};
use crate::hamiltonian::SectorOperator;
use crate::linalg::{self, ONE, ZERO};

/// How `max(H)` in the step-size condition `dt * max(H) <= 0.1` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepNorm {
    /// Largest absolute matrix element.
    #[default]
    MaxElement,
    /// Spectral radius; stricter for dense matrices.
    Spectral,
}

pub const MAX_STEP_PRODUCT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub taylor_order: usize,
    pub branching: usize,
    pub depth: usize,
    pub step_norm: StepNorm,
    /// Re-orthonormalize the columns of every rung after it is built.
    pub renormalize: bool,
    /// Upper bound on the bytes of one rung.
    pub rung_memory_cap: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            taylor_order: 4,
            branching: 2,
            depth: 10,
            step_norm: StepNorm::MaxElement,
            renormalize: false,
            rung_memory_cap: 1 << 31,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.taylor_order < 2 {
            return Err(Error::InvalidConfig("taylor_order must be at least 2".into()));
        }
        if self.branching < 2 {
            return Err(Error::InvalidConfig("branching must be at least 2".into()));
        }
        let reach = (self.branching as f64).powi(self.depth as i32);
        if reach > 2f64.powi(62) {
            return Err(Error::InvalidConfig("branching^depth overflows the step counter".into()));
        }
        Ok(())
    }

    /// Checks `dt * max(H) <= 0.1` for this operator.
    pub fn check_step(&self, h: &SectorOperator) -> Result<()> {
        self.validate()?;
        let scale = match self.step_norm {
            StepNorm::MaxElement => h.max_element(),
            StepNorm::Spectral => linalg::hermitian_eigenvalues(h.matrix())?
                .iter()
                .fold(0.0f64, |m, e| m.max(e.abs())),
        };
        let product = self.dt * scale;
        if product > MAX_STEP_PRODUCT * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { product, suggested_dt: MAX_STEP_PRODUCT / scale });
        }
        Ok(())
    }
}

/// Truncated Taylor series of `exp(-i dt H)` through order `k_max`.
pub fn base_step(h: &SectorOperator, cfg: &PropagatorConfig) -> Result<Mat<c64>> {
    h.check_hermitian()?;
    cfg.check_step(h)?;
    let n = h.dim();
    let mut poly = linalg::identity(n);
    // Horner: P <- I + (-i dt / k) H P for k = k_max .. 1
    for k in (1..=cfg.taylor_order).rev() {
        let scale = c64::new(0.0, -cfg.dt / k as f64);
        let mut next = linalg::identity(n);
        matmul(&mut next, Accum::Add, h.matrix(), poly.as_ref(), scale, get_global_parallelism());
        poly = next;
    }
    Ok(poly)
}

/// Rungs `U_0 .. U_r`, with `U_k` spanning `n^k` base steps.
#[derive(Debug, Clone)]
pub struct PropagatorLadder {
    basis: Arc<FockBasis>,
    dt: f64,
    branching: usize,
    rungs: Vec<Mat<c64>>,
    multiplications: usize,
}

impl PropagatorLadder {
    pub fn build(
        basis: Arc<FockBasis>,
        u0: Mat<c64>,
        dt: f64,
        branching: usize,
        depth: usize,
        renormalize: bool,
        rung_memory_cap: usize,
    ) -> Result<Self> {
        let n = basis.dim();
        if u0.nrows() != n || u0.ncols() != n {
            return Err(Error::ShapeMismatch(format!("U_0 is {}x{}, basis has {n}", u0.nrows(), u0.ncols())));
        }
        if branching < 2 {
            return Err(Error::InvalidConfig("branching must be at least 2".into()));
        }
        let bytes = n * n * std::mem::size_of::<c64>();
        if bytes > rung_memory_cap {
            return Err(Error::MemoryCap { bytes, cap: rung_memory_cap });
        }
        let mut rungs = Vec::with_capacity(depth + 1);
        let mut multiplications = 0;
        rungs.push(if renormalize { orthonormalize_columns(u0) } else { u0 });
        for _ in 0..depth {
            let prev = rungs.last().expect("at least U_0");
            let mut acc = prev.clone();
            for _ in 1..branching {
                acc = linalg::mul(acc.as_ref(), prev.as_ref());
                multiplications += 1;
            }
            if renormalize {
                acc = orthonormalize_columns(acc);
            }
            rungs.push(acc);
        }
        Ok(Self { basis, dt, branching, rungs, multiplications })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth(&self) -> usize {
        self.rungs.len() - 1
    }

    pub fn rung(&self, k: usize) -> MatRef<'_, c64> {
        self.rungs[k].as_ref()
    }

    pub fn multiplications(&self) -> usize {
        self.multiplications
    }

    pub fn rung_steps(&self, k: usize) -> u64 {
        (self.branching as u64).pow(k as u32)
    }

    pub fn rung_time(&self, k: usize) -> f64 {
        self.rung_steps(k) as f64 * self.dt
    }

    /// `max |U_k^dagger U_k - 1|`.
    pub fn unitarity_defect(&self, k: usize) -> f64 {
        let u = self.rung(k);
        let mut g = Mat::<c64>::zeros(u.ncols(), u.ncols());
        matmul(&mut g, Accum::Replace, u.adjoint(), u, ONE, get_global_parallelism());
        let mut worst = 0.0f64;
        for j in 0..g.ncols() {
            for i in 0..g.nrows() {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Signed number of base steps for time `t`. Off-lattice times are
    /// rounded to the nearest lattice point when `snap` is set, otherwise
    /// rejected.
    pub fn steps_for(&self, t: f64, snap: bool) -> Result<(i64, f64)> {
        lattice_steps(self.dt, t, snap)
    }

    /// Base-`n` digits of `|steps|`, most significant rung last. The top rung
    /// absorbs any excess beyond `n^(r+1) - 1`.
    fn digits(&self, steps: u64) -> Vec<u64> {
        let depth = self.depth();
        let n = self.branching as u64;
        let mut rest = steps;
        let mut digits = vec![0u64; depth + 1];
        for (k, d) in digits.iter_mut().enumerate().take(depth) {
            let _ = k;
            *d = rest % n;
            rest /= n;
        }
        digits[depth] = rest;
        digits
    }

    /// Evolves amplitudes by `steps` base steps (negative steps run backwards
    /// through the adjoint rungs).
    pub fn evolve_steps(&self, psi: &[c64], steps: i64) -> Vec<c64> {
        let digits = self.digits(steps.unsigned_abs());
        let mut v = psi.to_vec();
        for k in (0..=self.depth()).rev() {
            for _ in 0..digits[k] {
                v = if steps >= 0 { linalg::mat_vec(self.rung(k), &v) } else { adjoint_mat_vec(self.rung(k), &v) };
            }
        }
        v
    }

    /// `psi(t)`, returning the lattice time actually reached.
    pub fn evolve_to(&self, psi: &StateVector, t: f64, snap: bool) -> Result<(StateVector, f64)> {
        self.check_sector(psi.basis())?;
        if t < 0.0 {
            return Err(Error::InvalidConfig(format!("evolution time must be nonnegative, got {t}")));
        }
        let (steps, actual) = self.steps_for(t, snap)?;
        let out = self.evolve_steps(psi.amplitudes(), steps);
        Ok((StateVector::new(psi.basis().clone(), out)?, actual))
    }

    /// Dense operator for `steps` base steps.
    pub fn operator_for_steps(&self, steps: i64) -> Mat<c64> {
        let digits = self.digits(steps.unsigned_abs());
        let mut acc: Option<Mat<c64>> = None;
        for k in (0..=self.depth()).rev() {
            for _ in 0..digits[k] {
                let rung = if steps >= 0 { self.rung(k).to_owned() } else { self.rung(k).adjoint().to_owned() };
                acc = Some(match acc {
                    None => rung,
                    Some(a) => linalg::mul(rung.as_ref(), a.as_ref()),
                });
            }
        }
        acc.unwrap_or_else(|| linalg::identity(self.basis.dim()))
    }

    /// Evolves column `c` of `columns` by `steps[c]` base steps, batching all
    /// columns that need the same rung into one matrix product.
    pub fn evolve_columns(&self, columns: &mut Mat<c64>, steps: &[i64]) {
        assert_eq!(columns.ncols(), steps.len());
        assert_eq!(columns.nrows(), self.basis.dim());
        let digits: Vec<Vec<u64>> = steps.iter().map(|s| self.digits(s.unsigned_abs())).collect();
        let dim = columns.nrows();
        for k in (0..=self.depth()).rev() {
            let max_digit = digits.iter().map(|d| d[k]).max().unwrap_or(0);
            for rep in 1..=max_digit {
                for forward in [true, false] {
                    let picked: Vec<usize> = (0..steps.len())
                        .filter(|&c| digits[c][k] >= rep && (steps[c] >= 0) == forward)
                        .collect();
                    if picked.is_empty() {
                        continue;
                    }
                    let block = Mat::from_fn(dim, picked.len(), |i, j| columns[(i, picked[j])]);
                    let mut out = Mat::<c64>::zeros(dim, picked.len());
                    let rung = self.rung(k);
                    if forward {
                        matmul(&mut out, Accum::Replace, rung, block.as_ref(), ONE, get_global_parallelism());
                    } else {
                        matmul(&mut out, Accum::Replace, rung.adjoint(), block.as_ref(), ONE, get_global_parallelism());
                    }
                    for (j, &c) in picked.iter().enumerate() {
                        for i in 0..dim {
                            columns[(i, c)] = out[(i, j)];
                        }
                    }
                }
            }
        }
    }

    fn check_sector(&self, basis: &FockBasis) -> Result<()> {
        if basis.num_particles() != self.basis.num_particles() || basis.dim() != self.basis.dim() {
            return Err(Error::SectorMismatch {
                expected: self.basis.num_particles(),
                found: basis.num_particles(),
            });
        }
        Ok(())
    }
}

/// Builds `U_0` and the full ladder for `h`.
pub fn build_ladder(h: &SectorOperator, cfg: &PropagatorConfig) -> Result<PropagatorLadder> {
    let u0 = base_step(h, cfg)?;
    PropagatorLadder::build(
        h.basis().clone(),
        u0,
        cfg.dt,
        cfg.branching,
        cfg.depth,
        cfg.renormalize,
        cfg.rung_memory_cap,
    )
}

pub fn lattice_steps(dt: f64, t: f64, snap: bool) -> Result<(i64, f64)> {
    if !t.is_finite() {
        return Err(Error::NonFinite("time"));
    }
    let exact = t / dt;
    let nearest = exact.round();
    if (exact - nearest).abs() > 1e-6 && !snap {
        return Err(Error::UnreachableTime {
            requested: t,
            below: exact.floor() * dt,
            above: exact.ceil() * dt,
        });
    }
    Ok((nearest as i64, nearest * dt))
}

pub fn adjoint_mat_vec(a: MatRef<'_, c64>, v: &[c64]) -> Vec<c64> {
    (0..a.ncols())
        .map(|j| a.col(j).iter().zip(v).fold(ZERO, |acc, (x, y)| acc + x.conj() * y))
        .collect()
}

/// Modified Gram-Schmidt on the columns.
fn orthonormalize_columns(mut m: Mat<c64>) -> Mat<c64> {
    let n = m.ncols();
    for j in 0..n {
        for k in 0..j {
            let proj = (0..m.nrows()).fold(ZERO, |acc, i| acc + m[(i, k)].conj() * m[(i, j)]);
            for i in 0..m.nrows() {
                let v = m[(i, k)];
                m[(i, j)] -= proj * v;
            }
        }
        let nrm = (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..m.nrows() {
            m[(i, j)] /= nrm;
        }
    }
    m
}

/// Norm and energy drift relative to the initial state, tracked over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub initial_energy: f64,
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
    pub samples: usize,
}

impl DriftReport {
    pub fn new(initial_energy: f64) -> Self {
        Self { initial_energy, ..Default::default() }
    }

    pub fn record(&mut self, h: &SectorOperator, psi: &[c64]) -> (f64, f64) {
        let norm_drift = (linalg::norm(psi) - 1.0).abs();
        let energy = h.expectation(psi).re;
        let energy_drift = (energy - self.initial_energy).abs() / self.initial_energy.abs().max(f64::MIN_POSITIVE);
        self.max_norm_drift = self.max_norm_drift.max(norm_drift);
        self.max_energy_drift = self.max_energy_drift.max(energy_drift);
        self.samples += 1;
        (norm_drift, energy_drift)
    }
}
