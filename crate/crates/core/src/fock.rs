//! Bosonic occupation-number bases for fixed particle-number sectors.
//!
//! Tuples `(n_1, ..., n_M)` are ordered lexicographically *decreasing*, so the
//! first state of every sector is `(N, 0, ..., 0)` and the last `(0, ..., 0, N)`.
//! Positions are computed by combinatorial ranking, never by hashing, which
//! keeps indices reproducible between runs and platforms.
//!
//! Mode indices in this API are zero-based.

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::{self, ZERO};

/// Largest sector that will be enumerated unless a different cap is given.
pub const DEFAULT_DIMENSION_CAP: usize = 40_000;

/// Binomial coefficient; saturates at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Number of ways to place `particles` bosons in `modes` modes.
pub fn sector_dimension(modes: usize, particles: usize) -> u64 {
    if modes == 0 {
        return u64::from(particles == 0);
    }
    binomial((particles + modes - 1) as u64, (modes - 1) as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    num_modes: usize,
    num_particles: usize,
    occupations: Vec<u32>,
}

impl FockBasis {
    pub fn new(num_modes: usize, num_particles: usize) -> Result<Self> {
        Self::with_cap(num_modes, num_particles, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(num_modes: usize, num_particles: usize, cap: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::InvalidConfig("a basis needs at least one mode".into()));
        }
        let dimension = sector_dimension(num_modes, num_particles);
        if dimension > cap as u64 {
            return Err(Error::Capacity { dimension, cap });
        }
        let dim = dimension as usize;
        let mut occupations = Vec::with_capacity(dim * num_modes);
        let mut current = vec![0u32; num_modes];
        current[0] = num_particles as u32;
        loop {
            occupations.extend_from_slice(&current);
            if !advance(&mut current) {
                break;
            }
        }
        debug_assert_eq!(occupations.len(), dim * num_modes);
        Ok(Self { num_modes, num_particles, occupations })
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn num_particles(&self) -> usize {
        self.num_particles
    }

    pub fn dim(&self) -> usize {
        self.occupations.len() / self.num_modes
    }

    pub fn state(&self, index: usize) -> &[u32] {
        &self.occupations[index * self.num_modes..(index + 1) * self.num_modes]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.occupations.chunks_exact(self.num_modes)
    }

    /// Position of `tuple` in this basis, or `None` if it does not belong to
    /// the sector.
    pub fn index_of(&self, tuple: &[u32]) -> Option<usize> {
        if tuple.len() != self.num_modes {
            return None;
        }
        let total: u64 = tuple.iter().map(|&n| u64::from(n)).sum();
        if total != self.num_particles as u64 {
            return None;
        }
        Some(rank(tuple, self.num_particles))
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes {
            return Err(Error::InvalidMode { mode, num_modes: self.num_modes });
        }
        Ok(())
    }
}

/// Steps `tuple` to its successor in decreasing-lexicographic order.
fn advance(tuple: &mut [u32]) -> bool {
    let m = tuple.len();
    let Some(k) = (0..m.saturating_sub(1)).rev().find(|&k| tuple[k] > 0) else {
        return false;
    };
    let tail: u32 = tuple[k + 1..].iter().sum();
    tuple[k] -= 1;
    tuple[k + 1] = tail + 1;
    for t in &mut tuple[k + 2..] {
        *t = 0;
    }
    true
}

fn rank(tuple: &[u32], total: usize) -> usize {
    let m = tuple.len();
    let mut remaining = total as u64;
    let mut index = 0u64;
    for (k, &n) in tuple.iter().enumerate().take(m - 1) {
        let n = u64::from(n);
        if remaining > n {
            let free = (m - k - 1) as u64;
            index += binomial(remaining - n - 1 + free, free);
        }
        remaining -= n;
    }
    index as usize
}

/// Removes one boson from `mode`; returns the matrix element `sqrt(n)`.
pub fn annihilate_in_place(tuple: &mut [u32], mode: usize) -> Option<f64> {
    let n = tuple[mode];
    if n == 0 {
        return None;
    }
    tuple[mode] = n - 1;
    Some(f64::from(n).sqrt())
}

/// Adds one boson to `mode`; returns the matrix element `sqrt(n + 1)`.
pub fn create_in_place(tuple: &mut [u32], mode: usize) -> f64 {
    let n = tuple[mode];
    tuple[mode] = n + 1;
    f64::from(n + 1).sqrt()
}

/// Amplitudes over one sector basis.
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<FockBasis>,
    amplitudes: Vec<c64>,
}

impl StateVector {
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<c64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn zeros(basis: Arc<FockBasis>) -> Self {
        let amplitudes = vec![ZERO; basis.dim()];
        Self { basis, amplitudes }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [c64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<c64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amplitudes)
    }

    /// Physical states must have unit norm to within `1e-8`.
    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-8
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amplitudes {
                *a /= n;
            }
        }
        self
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<c64> {
        if self.basis.num_particles() != other.basis.num_particles() {
            return Err(Error::SectorMismatch {
                expected: self.basis.num_particles(),
                found: other.basis.num_particles(),
            });
        }
        Ok(linalg::dot(&self.amplitudes, &other.amplitudes))
    }

    /// `<n_mode>` for this (assumed normalized) state.
    pub fn occupation(&self, mode: usize) -> Result<f64> {
        self.basis.check_mode(mode)?;
        Ok(self
            .basis
            .states()
            .zip(&self.amplitudes)
            .map(|(s, a)| f64::from(s[mode]) * a.norm_sqr())
            .sum())
    }

    /// All level occupations at once.
    pub fn occupations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.num_modes()];
        for (s, a) in self.basis.states().zip(&self.amplitudes) {
            let p = a.norm_sqr();
            for (o, &n) in out.iter_mut().zip(s) {
                *o += f64::from(n) * p;
            }
        }
        out
    }
}

/// Sparse matrix of one ladder operator between two sectors: entries
/// `(source index, target index, coefficient)`.
#[derive(Debug, Clone)]
pub struct LadderTable {
    source_dim: usize,
    target_dim: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl LadderTable {
    /// `b_mode` mapping `from` (N particles) into `to` (N - 1 particles).
    pub fn annihilation(mode: usize, from: &FockBasis, to: &FockBasis) -> Result<Self> {
        from.check_mode(mode)?;
        check_target(from, to, -1)?;
        let mut entries = Vec::with_capacity(from.dim());
        let mut scratch = vec![0u32; from.num_modes()];
        for (src, s) in from.states().enumerate() {
            scratch.copy_from_slice(s);
            if let Some(c) = annihilate_in_place(&mut scratch, mode) {
                let dst = to.index_of(&scratch).expect("target sector contains the lowered tuple");
                entries.push((src as u32, dst as u32, c));
            }
        }
        Ok(Self { source_dim: from.dim(), target_dim: to.dim(), entries })
    }

    /// `b_mode^dagger` mapping `from` (N particles) into `to` (N + 1 particles).
    pub fn creation(mode: usize, from: &FockBasis, to: &FockBasis) -> Result<Self> {
        from.check_mode(mode)?;
        check_target(from, to, 1)?;
        let mut entries = Vec::with_capacity(from.dim());
        let mut scratch = vec![0u32; from.num_modes()];
        for (src, s) in from.states().enumerate() {
            scratch.copy_from_slice(s);
            let c = create_in_place(&mut scratch, mode);
            let dst = to.index_of(&scratch).expect("target sector contains the raised tuple");
            entries.push((src as u32, dst as u32, c));
        }
        Ok(Self { source_dim: from.dim(), target_dim: to.dim(), entries })
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    /// `out += scale * Op * input`.
    pub fn apply_add(&self, input: &[c64], scale: c64, out: &mut [c64]) {
        debug_assert_eq!(input.len(), self.source_dim);
        debug_assert_eq!(out.len(), self.target_dim);
        for &(src, dst, c) in &self.entries {
            out[dst as usize] += scale * input[src as usize] * c;
        }
    }

    pub fn apply(&self, input: &[c64]) -> Vec<c64> {
        let mut out = vec![ZERO; self.target_dim];
        self.apply_add(input, linalg::ONE, &mut out);
        out
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::zeros(self.target_dim, self.source_dim);
        for &(src, dst, c) in &self.entries {
            m[(dst as usize, src as usize)] += c64::new(c, 0.0);
        }
        m
    }
}

fn check_target(from: &FockBasis, to: &FockBasis, shift: isize) -> Result<()> {
    let expected = from.num_particles() as isize + shift;
    if expected < 0 || to.num_particles() as isize != expected {
        return Err(Error::SectorMismatch {
            expected: expected.max(0) as usize,
            found: to.num_particles(),
        });
    }
    if to.num_modes() != from.num_modes() {
        return Err(Error::ShapeMismatch(format!(
            "sectors over {} and {} modes",
            from.num_modes(),
            to.num_modes()
        )));
    }
    Ok(())
}

/// `b_mode |psi>`, landing in `target` (one particle fewer). Generally unnormalized.
pub fn apply_annihilation(mode: usize, psi: &StateVector, target: &Arc<FockBasis>) -> Result<StateVector> {
    if psi.basis.num_particles() == 0 {
        return Err(Error::SectorMismatch { expected: 1, found: 0 });
    }
    let table = LadderTable::annihilation(mode, &psi.basis, target)?;
    StateVector::new(target.clone(), table.apply(&psi.amplitudes))
}

/// `b_mode^dagger |psi>`, landing in `target` (one particle more).
pub fn apply_creation(mode: usize, psi: &StateVector, target: &Arc<FockBasis>) -> Result<StateVector> {
    let table = LadderTable::creation(mode, &psi.basis, target)?;
    StateVector::new(target.clone(), table.apply(&psi.amplitudes))
}

/// `n_mode |psi>`; diagonal in the occupation basis.
pub fn apply_number(mode: usize, psi: &StateVector) -> Result<StateVector> {
    psi.basis.check_mode(mode)?;
    let amplitudes = psi
        .basis
        .states()
        .zip(&psi.amplitudes)
        .map(|(s, &a)| a * f64::from(s[mode]))
        .collect();
    StateVector::new(psi.basis.clone(), amplitudes)
}

/// On-demand cache of sector bases for one mode count.
#[derive(Debug, Clone)]
pub struct SectorCache {
    num_modes: usize,
    cap: usize,
    sectors: BTreeMap<usize, Arc<FockBasis>>,
}

impl SectorCache {
    pub fn new(num_modes: usize, cap: usize) -> Self {
        Self { num_modes, cap, sectors: BTreeMap::new() }
    }

    pub fn get(&mut self, particles: usize) -> Result<Arc<FockBasis>> {
        if let Some(b) = self.sectors.get(&particles) {
            return Ok(b.clone());
        }
        let basis = Arc::new(FockBasis::with_cap(self.num_modes, particles, self.cap)?);
        self.sectors.insert(particles, basis.clone());
        Ok(basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> c64 {
        c64::new(re, 0.0)
    }

    fn exhaustive(modes: usize, particles: usize) -> usize {
        // Count every tuple in [0, N]^M that sums to N.
        let mut count = 0;
        let mut t = vec![0usize; modes];
        loop {
            if t.iter().sum::<usize>() == particles {
                count += 1;
            }
            let mut k = 0;
            loop {
                if k == modes {
                    return count;
                }
                t[k] += 1;
                if t[k] <= particles {
                    break;
                }
                t[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn dimension_matches_exhaustive_count() {
        for m in 1..=4 {
            for n in 0..=8 {
                assert_eq!(sector_dimension(m, n) as usize, exhaustive(m, n), "M={m} N={n}");
            }
        }
        // M = 5 and 6 up to N = 30 against the closed form through direct enumeration length.
        for m in 5..=6 {
            for n in (0..=30).step_by(5) {
                let dim = sector_dimension(m, n);
                if dim <= 40_000 {
                    assert_eq!(FockBasis::new(m, n).unwrap().dim() as u64, dim);
                }
            }
        }
    }

    #[test]
    fn full_size_dimensions() {
        assert_eq!(FockBasis::new(5, 25).unwrap().dim(), 23751);
        let vac = FockBasis::new(5, 0).unwrap();
        assert_eq!(vac.dim(), 1);
        assert_eq!(vac.state(0), &[0, 0, 0, 0, 0]);
        let two = FockBasis::new(2, 2).unwrap();
        let states: Vec<_> = two.states().map(|s| s.to_vec()).collect();
        assert_eq!(states, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn capacity_error() {
        let err = FockBasis::with_cap(5, 25, 1000).unwrap_err();
        assert!(matches!(err, Error::Capacity { dimension: 23751, cap: 1000 }));
    }

    #[test]
    fn ranking_is_a_bijection() {
        for (m, n) in [(1, 4), (3, 5), (4, 6), (5, 8)] {
            let b = FockBasis::new(m, n).unwrap();
            for (k, s) in b.states().enumerate() {
                assert_eq!(b.index_of(s), Some(k));
            }
        }
        let b = FockBasis::new(3, 2).unwrap();
        assert_eq!(b.index_of(&[1, 1, 1]), None);
        assert_eq!(b.index_of(&[1, 1]), None);
    }

    #[test]
    fn ladder_rules() {
        let s2 = Arc::new(FockBasis::new(2, 2).unwrap());
        let s1 = Arc::new(FockBasis::new(2, 1).unwrap());
        let s0 = Arc::new(FockBasis::new(2, 0).unwrap());

        let mut psi = StateVector::zeros(s2.clone());
        psi.amplitudes_mut()[0] = c(1.0); // |2,0>
        let out = apply_annihilation(0, &psi, &s1).unwrap();
        assert!((out.amplitudes()[s1.index_of(&[1, 0]).unwrap()] - c(2f64.sqrt())).norm() < 1e-15);
        let out = apply_annihilation(1, &psi, &s1).unwrap();
        assert!(out.norm() == 0.0);

        let mut vac = StateVector::zeros(s0);
        vac.amplitudes_mut()[0] = c(1.0);
        let one = apply_creation(0, &vac, &s1).unwrap();
        assert_eq!(one.amplitudes()[s1.index_of(&[1, 0]).unwrap()], c(1.0));
        let two = apply_creation(0, &one, &s2).unwrap();
        assert!((two.amplitudes()[0] - c(2f64.sqrt())).norm() < 1e-15);

        let n = apply_number(0, &psi).unwrap();
        assert_eq!(n.amplitudes()[0], c(2.0));
    }

    #[test]
    fn sector_mismatch_errors() {
        let s2 = Arc::new(FockBasis::new(2, 2).unwrap());
        let psi = StateVector::zeros(s2.clone());
        assert!(matches!(apply_annihilation(0, &psi, &s2), Err(Error::SectorMismatch { .. })));
        assert!(matches!(apply_creation(0, &psi, &s2), Err(Error::SectorMismatch { .. })));
        assert!(matches!(apply_number(3, &psi), Err(Error::InvalidMode { .. })));
        let vac = StateVector::zeros(Arc::new(FockBasis::new(2, 0).unwrap()));
        assert!(matches!(apply_annihilation(0, &vac, &s2), Err(Error::SectorMismatch { .. })));
    }

    #[test]
    fn superposition_occupation() {
        let s2 = Arc::new(FockBasis::new(2, 2).unwrap());
        let h = 0.5f64.sqrt();
        let mut psi = StateVector::zeros(s2);
        psi.amplitudes_mut()[0] = c(h);
        psi.amplitudes_mut()[2] = c(h);
        assert!((psi.occupation(0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn creation_is_adjoint_of_annihilation() {
        for (m, n) in [(2, 3), (3, 4), (4, 5), (5, 4)] {
            let lo = FockBasis::new(m, n).unwrap();
            let hi = FockBasis::new(m, n + 1).unwrap();
            if hi.dim() > 500 {
                continue;
            }
            for mode in 0..m {
                let a = LadderTable::annihilation(mode, &hi, &lo).unwrap().to_dense();
                let ad = LadderTable::creation(mode, &lo, &hi).unwrap().to_dense();
                assert_eq!(a.nrows(), ad.ncols());
                for i in 0..ad.nrows() {
                    for j in 0..ad.ncols() {
                        assert_eq!(ad[(i, j)], a[(j, i)].conj());
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_commutator() {
        for m in 1..=4 {
            for n in 0..=6 {
                let mut cache = SectorCache::new(m, DEFAULT_DIMENSION_CAP);
                let mid = cache.get(n).unwrap();
                let up = cache.get(n + 1).unwrap();
                for mode in 0..m {
                    let raise = LadderTable::creation(mode, &mid, &up).unwrap();
                    let lower_up = LadderTable::annihilation(mode, &up, &mid).unwrap();
                    let lower = (n > 0).then(|| {
                        let down = cache.get(n - 1).unwrap();
                        (
                            LadderTable::annihilation(mode, &mid, &down).unwrap(),
                            LadderTable::creation(mode, &down, &mid).unwrap(),
                        )
                    });
                    for k in 0..mid.dim() {
                        let mut e = vec![ZERO; mid.dim()];
                        e[k] = c(1.0);
                        let mut out = lower_up.apply(&raise.apply(&e));
                        if let Some((a, ad)) = &lower {
                            let back = ad.apply(&a.apply(&e));
                            for (o, b) in out.iter_mut().zip(back) {
                                *o -= b;
                            }
                        }
                        for (j, o) in out.iter().enumerate() {
                            let expect = if j == k { 1.0 } else { 0.0 };
                            assert!((o - c(expect)).norm() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}
