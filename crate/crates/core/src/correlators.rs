//! Two-time correlation functions at fixed center-of-motion time and their
//! energy spectra.
//!
//! With `t1 = t + tau/2`, `t2 = t - tau/2` and `h = dtau / 2`, the grid point
//! `tau_k = 2 k h` uses the prefix states `phi(s) = U(s) psi0` at
//! `s_{+-k} = t +- k h` and splits the middle propagator symmetrically, e.g.
//!
//! `G<_ij(tau_k) = -i <U(kh) b_j phi(s_-k) | U(-kh) b_i phi(s_k)>` in sector `N - 1`.
//!
//! Every bra and ket is a column evolved by a signed multiple of `h`, so all
//! grid points of one correlator are advanced together rung by rung.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{LadderTable, StateVector};
use crate::linalg::{self, ZERO};
use crate::propagator::{adjoint_mat_vec, lattice_steps, PropagatorLadder};

/// Uniform grid `tau_k = k * step` for `k = -K ..= K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    step: f64,
    half_len: usize,
}

impl TauGrid {
    pub fn new(tau_max: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0 && tau_max.is_finite() && tau_max >= 0.0) {
            return Err(Error::InvalidConfig(format!("bad tau grid: tau_max={tau_max}, step={step}")));
        }
        let k = tau_max / step;
        if (k - k.round()).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!("tau_max={tau_max} is not a multiple of step={step}")));
        }
        Ok(Self { step, half_len: k.round() as usize })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn half_len(&self) -> usize {
        self.half_len
    }

    pub fn len(&self) -> usize {
        2 * self.half_len + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tau_max(&self) -> f64 {
        self.half_len as f64 * self.step
    }

    /// `tau` at storage index `idx` (index `K` is `tau = 0`).
    pub fn tau(&self, idx: usize) -> f64 {
        (idx as f64 - self.half_len as f64) * self.step
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.tau(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelatorKind {
    Lesser,
    Greater,
    Keldysh,
    Spectral,
    DensityForward,
    DensityReversed,
}

impl CorrelatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lesser => "lesser",
            Self::Greater => "greater",
            Self::Keldysh => "keldysh",
            Self::Spectral => "spectral",
            Self::DensityForward => "density_forward",
            Self::DensityReversed => "density_reversed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimeSeries {
    pub kind: CorrelatorKind,
    /// Center-of-motion time actually used (after lattice snapping).
    pub com_time: f64,
    pub grid: TauGrid,
    /// Indexed like `grid`.
    pub values: Vec<c64>,
    /// Largest relative norm change of any evolved vector.
    pub norm_drift: f64,
}

impl TwoTimeSeries {
    pub fn zeros(kind: CorrelatorKind, com_time: f64, grid: TauGrid) -> Self {
        Self { kind, com_time, grid, values: vec![ZERO; grid.len()], norm_drift: 0.0 }
    }

    pub fn at_zero(&self) -> c64 {
        self.values[self.grid.half_len]
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.com_time != other.com_time {
            return Err(Error::GridMismatch(format!(
                "t={} {:?} vs t={} {:?}",
                self.com_time, self.grid, other.com_time, other.grid
            )));
        }
        Ok(())
    }

    /// `self += weight * other`, for ensemble averages.
    pub fn accumulate(&mut self, other: &Self, weight: f64) -> Result<()> {
        self.check_compatible(other)?;
        if self.kind != other.kind {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.kind, other.kind)));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * weight;
        }
        self.norm_drift = self.norm_drift.max(other.norm_drift);
        Ok(())
    }
}

/// Linear combination `sum_i u_i b_i` of annihilation operators.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector(pub Vec<c64>);

impl ModeVector {
    pub fn unit(mode: usize, num_modes: usize) -> Self {
        let mut u = vec![ZERO; num_modes];
        u[mode] = linalg::ONE;
        Self(u)
    }
}

/// Ladders for sectors `N - 1`, `N`, `N + 1` on a common time step.
#[derive(Debug, Clone, Copy)]
pub struct SectorLadders<'a> {
    /// Absent only when `N = 0`.
    pub lower: Option<&'a PropagatorLadder>,
    pub middle: &'a PropagatorLadder,
    pub upper: &'a PropagatorLadder,
}

impl SectorLadders<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.middle.basis().num_particles();
        let m = self.middle.basis().num_modes();
        let check = |ladder: &PropagatorLadder, expected: usize| -> Result<()> {
            if ladder.basis().num_particles() != expected || ladder.basis().num_modes() != m {
                return Err(Error::SectorMismatch { expected, found: ladder.basis().num_particles() });
            }
            if ladder.dt() != self.middle.dt() {
                return Err(Error::GridMismatch(format!(
                    "ladder time steps differ: {} vs {}",
                    ladder.dt(),
                    self.middle.dt()
                )));
            }
            Ok(())
        };
        check(self.upper, n + 1)?;
        match (self.lower, n) {
            (Some(l), _) if n > 0 => check(l, n - 1),
            (None, 0) => Ok(()),
            (None, _) => Err(Error::InvalidConfig(format!("missing ladder for sector {}", n - 1))),
            (Some(l), _) => Err(Error::SectorMismatch { expected: 0, found: l.basis().num_particles() }),
        }
    }
}

/// Resolved lattice positions for one correlator evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub requested_time: f64,
    pub com_time: f64,
    pub com_steps: i64,
    pub half_step_steps: i64,
    pub snapped: bool,
    pub grid: TauGrid,
}

impl SplitPlan {
    pub fn new(dt: f64, t: f64, grid: TauGrid, snap: bool) -> Result<Self> {
        let (com_steps, com_time) = lattice_steps(dt, t, snap)?;
        let (half_step_steps, _) = lattice_steps(dt, grid.step() / 2.0, false).map_err(|_| {
            Error::InvalidConfig(format!("half the tau step ({}) must be a multiple of dt = {dt}", grid.step() / 2.0))
        })?;
        if half_step_steps == 0 {
            return Err(Error::InvalidConfig("tau step is below twice the propagator dt".into()));
        }
        Ok(Self { requested_time: t, com_time, com_steps, half_step_steps, snapped: com_time != t, grid })
    }
}

/// Columns `phi(s_m)` for `m = -K ..= K`: coarse ladder to `t`, then repeated
/// fine steps of `h` in both directions.
pub fn prefix_states(ladder: &PropagatorLadder, psi0: &StateVector, plan: &SplitPlan) -> Result<Mat<c64>> {
    if psi0.basis().num_particles() != ladder.basis().num_particles() || psi0.basis().dim() != ladder.basis().dim() {
        return Err(Error::SectorMismatch {
            expected: ladder.basis().num_particles(),
            found: psi0.basis().num_particles(),
        });
    }
    let k = plan.grid.half_len();
    let dim = ladder.basis().dim();
    let centre = ladder.evolve_steps(psi0.amplitudes(), plan.com_steps);
    let fine = ladder.operator_for_steps(plan.half_step_steps);
    let mut out = Mat::<c64>::zeros(dim, 2 * k + 1);
    let mut set = |col: usize, v: &[c64]| {
        for (i, &x) in v.iter().enumerate() {
            out[(i, col)] = x;
        }
    };
    set(k, &centre);
    let mut fwd = centre.clone();
    let mut bwd = centre;
    for m in 1..=k {
        fwd = linalg::mat_vec(fine.as_ref(), &fwd);
        bwd = adjoint_mat_vec(fine.as_ref(), &bwd);
        set(k + m, &fwd);
        set(k - m, &bwd);
    }
    Ok(out)
}

/// Which operator maps a prefix state into the evolution sector.
enum Excitation<'a> {
    Lower(&'a [LadderTable], &'a ModeVector),
    Raise(&'a [LadderTable], &'a ModeVector),
    Number(&'a [Vec<f64>], usize),
}

impl Excitation<'_> {
    fn apply(&self, input: &[c64], out: &mut [c64]) {
        out.fill(ZERO);
        match self {
            Excitation::Lower(tables, u) => {
                for (t, &c) in tables.iter().zip(&u.0) {
                    if c != ZERO {
                        t.apply_add(input, c, out);
                    }
                }
            }
            Excitation::Raise(tables, u) => {
                for (t, &c) in tables.iter().zip(&u.0) {
                    if c != ZERO {
                        t.apply_add(input, c.conj(), out);
                    }
                }
            }
            Excitation::Number(occ, mode) => {
                for ((o, &x), &n) in out.iter_mut().zip(input).zip(&occ[*mode]) {
                    *o = x * n;
                }
            }
        }
    }
}

/// Applies `op` to prefix column `col_of(k)` for each `k`, evolves it by
/// `sign * k * h` in `ladder`, and returns the evolved columns plus the worst
/// relative norm drift.
fn excite_and_evolve(
    ladder: &PropagatorLadder,
    prefix: &Mat<c64>,
    plan: &SplitPlan,
    op: &Excitation<'_>,
    ks: &[i64],
    col_of: impl Fn(i64) -> usize,
    steps_of: impl Fn(i64) -> i64,
) -> (Mat<c64>, f64) {
    let dim = ladder.basis().dim();
    let mut cols = Mat::<c64>::zeros(dim, ks.len());
    let mut buf = vec![ZERO; dim];
    let mut norms = Vec::with_capacity(ks.len());
    let mut input = vec![ZERO; prefix.nrows()];
    for (c, &k) in ks.iter().enumerate() {
        let src = col_of(k);
        for (i, x) in input.iter_mut().enumerate() {
            *x = prefix[(i, src)];
        }
        op.apply(&input, &mut buf);
        norms.push(linalg::norm(&buf));
        for (i, &x) in buf.iter().enumerate() {
            cols[(i, c)] = x;
        }
    }
    let steps: Vec<i64> = ks.iter().map(|&k| steps_of(k) * plan.half_step_steps).collect();
    ladder.evolve_columns(&mut cols, &steps);
    let mut drift = 0.0f64;
    for (c, &n0) in norms.iter().enumerate() {
        if n0 > 0.0 {
            let n1 = (0..dim).map(|i| cols[(i, c)].norm_sqr()).sum::<f64>().sqrt();
            drift = drift.max((n1 - n0).abs() / n0);
        }
    }
    (cols, drift)
}

fn column_dots(bra: &Mat<c64>, ket: &Mat<c64>) -> Vec<c64> {
    (0..bra.ncols())
        .map(|c| bra.col(c).iter().zip(ket.col(c).iter()).fold(ZERO, |acc, (x, y)| acc + x.conj() * y))
        .collect()
}

/// Evaluated offsets: `0..=K` when the negative half follows from conjugation,
/// otherwise `-K..=K`.
fn offsets(plan: &SplitPlan, mirrored: bool) -> Vec<i64> {
    let k = plan.grid.half_len() as i64;
    if mirrored {
        (0..=k).collect()
    } else {
        (-k..=k).collect()
    }
}

/// Stores `values[k]` at grid index `K + k`; with `mirror = Some(s)` also
/// fills `tau_{-k}` with `s * conj(value)`.
fn assemble(plan: &SplitPlan, ks: &[i64], values: &[c64], mirror: Option<f64>) -> Vec<c64> {
    let k_half = plan.grid.half_len() as i64;
    let mut out = vec![ZERO; plan.grid.len()];
    for (&k, &v) in ks.iter().zip(values) {
        out[(k_half + k) as usize] = v;
        if let Some(sign) = mirror {
            if k > 0 {
                out[(k_half - k) as usize] = v.conj() * sign;
            }
        }
    }
    out
}

/// Creation and annihilation tables between the sectors around `N`.
pub struct LadderTables {
    lowering: Vec<LadderTable>,
    raising: Vec<LadderTable>,
}

impl LadderTables {
    pub fn new(ladders: &SectorLadders<'_>) -> Result<Self> {
        ladders.validate()?;
        let mid = ladders.middle.basis();
        let modes = mid.num_modes();
        let lowering = match ladders.lower {
            Some(l) => (0..modes).map(|i| LadderTable::annihilation(i, mid, l.basis())).collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let raising =
            (0..modes).map(|i| LadderTable::creation(i, mid, ladders.upper.basis())).collect::<Result<_>>()?;
        Ok(Self { lowering, raising })
    }
}

/// Lesser and greater functions of `psi0` for `b_left` (`i`) and `b_right` (`j`).
#[derive(Debug, Clone)]
pub struct GreenPair {
    pub lesser: TwoTimeSeries,
    pub greater: TwoTimeSeries,
}

/// Lesser and greater functions for mode-vector pairs sharing one set of
/// prefix states. Pairs with identical operators are evaluated for `tau >= 0`
/// and mirrored via `G(-tau) = -conj(G(tau))`.
pub fn single_particle_batch(
    psi0: &StateVector,
    ladders: &SectorLadders<'_>,
    pairs: &[(ModeVector, ModeVector)],
    t: f64,
    grid: TauGrid,
    snap: bool,
) -> Result<(SplitPlan, Vec<GreenPair>)> {
    let tables = LadderTables::new(ladders)?;
    let m = ladders.middle.basis().num_modes();
    for (u, v) in pairs {
        if u.0.len() != m || v.0.len() != m {
            return Err(Error::ShapeMismatch(format!("mode vectors must have {m} entries")));
        }
    }
    let plan = SplitPlan::new(ladders.middle.dt(), t, grid, snap)?;
    let prefix = prefix_states(ladders.middle, psi0, &plan)?;
    let k_half = grid.half_len() as i64;
    let col = |k: i64| (k_half + k) as usize;
    let neg = |k: i64| (k_half - k) as usize;
    let mut out = Vec::with_capacity(pairs.len());
    for (left, right) in pairs {
        let diagonal = left == right;
        let ks = offsets(&plan, diagonal);
        let mirror = diagonal.then_some(-1.0);

        let lesser = match ladders.lower {
            Some(lower) => {
                let (ket, d1) =
                    excite_and_evolve(lower, &prefix, &plan, &Excitation::Lower(&tables.lowering, left), &ks, col, |k| -k);
                let (bra, d2) =
                    excite_and_evolve(lower, &prefix, &plan, &Excitation::Lower(&tables.lowering, right), &ks, neg, |k| k);
                let vals: Vec<c64> = column_dots(&bra, &ket).into_iter().map(|z| c64::new(z.im, -z.re)).collect();
                TwoTimeSeries {
                    kind: CorrelatorKind::Lesser,
                    com_time: plan.com_time,
                    grid,
                    values: assemble(&plan, &ks, &vals, mirror),
                    norm_drift: d1.max(d2),
                }
            }
            None => TwoTimeSeries::zeros(CorrelatorKind::Lesser, plan.com_time, grid),
        };

        let upper = ladders.upper;
        let (bra, d1) =
            excite_and_evolve(upper, &prefix, &plan, &Excitation::Raise(&tables.raising, left), &ks, col, |k| -k);
        let (ket, d2) =
            excite_and_evolve(upper, &prefix, &plan, &Excitation::Raise(&tables.raising, right), &ks, neg, |k| k);
        let vals: Vec<c64> = column_dots(&bra, &ket).into_iter().map(|z| c64::new(z.im, -z.re)).collect();
        let greater = TwoTimeSeries {
            kind: CorrelatorKind::Greater,
            com_time: plan.com_time,
            grid,
            values: assemble(&plan, &ks, &vals, mirror),
            norm_drift: d1.max(d2),
        };
        out.push(GreenPair { lesser, greater });
    }
    Ok((plan, out))
}

/// `G<_ij` and `G>_ij` for mode indices `(i, j)` (0-based).
pub fn single_particle_correlators(
    psi0: &StateVector,
    ladders: &SectorLadders<'_>,
    pair: (usize, usize),
    t: f64,
    grid: TauGrid,
    snap: bool,
) -> Result<GreenPair> {
    let m = ladders.middle.basis().num_modes();
    for mode in [pair.0, pair.1] {
        if mode >= m {
            return Err(Error::InvalidMode { mode, num_modes: m });
        }
    }
    let pairs = [(ModeVector::unit(pair.0, m), ModeVector::unit(pair.1, m))];
    let (_, mut out) = single_particle_batch(psi0, ladders, &pairs, t, grid, snap)?;
    Ok(out.pop().expect("one pair requested"))
}

/// `G^K = G> + G<` and `A = i (G> - G<)`.
pub fn keldysh_and_spectral(lesser: &TwoTimeSeries, greater: &TwoTimeSeries) -> Result<(TwoTimeSeries, TwoTimeSeries)> {
    lesser.check_compatible(greater)?;
    let i = linalg::I;
    let combine = |kind, f: &dyn Fn(c64, c64) -> c64| TwoTimeSeries {
        kind,
        com_time: lesser.com_time,
        grid: lesser.grid,
        values: greater.values.iter().zip(&lesser.values).map(|(&g, &l)| f(g, l)).collect(),
        norm_drift: lesser.norm_drift.max(greater.norm_drift),
    };
    Ok((
        combine(CorrelatorKind::Keldysh, &|g, l| g + l),
        combine(CorrelatorKind::Spectral, &|g, l| i * (g - l)),
    ))
}

/// `<n_i(t1) n_j(t2)>` and `<n_j(t2) n_i(t1)>`.
#[derive(Debug, Clone)]
pub struct DensityPair {
    pub forward: TwoTimeSeries,
    pub reversed: TwoTimeSeries,
}

/// Density-density correlators, all in sector `N`. The forward ordering uses
/// the symmetric split; the reversed ordering evolves a single vector across
/// the full `tau`, so the two are computed along independent routes.
pub fn density_correlators(
    psi0: &StateVector,
    ladder: &PropagatorLadder,
    pair: (usize, usize),
    t: f64,
    grid: TauGrid,
    snap: bool,
) -> Result<DensityPair> {
    let basis = ladder.basis();
    let m = basis.num_modes();
    for mode in [pair.0, pair.1] {
        if mode >= m {
            return Err(Error::InvalidMode { mode, num_modes: m });
        }
    }
    let occ: Vec<Vec<f64>> = (0..m).map(|i| basis.states().map(|s| f64::from(s[i])).collect()).collect();
    let plan = SplitPlan::new(ladder.dt(), t, grid, snap)?;
    let prefix = prefix_states(ladder, psi0, &plan)?;
    let k_half = grid.half_len() as i64;
    let col = |k: i64| (k_half + k) as usize;
    let neg = |k: i64| (k_half - k) as usize;
    let (i, j) = pair;

    let diagonal = i == j;
    let ks = offsets(&plan, diagonal);
    let (bra, d1) = excite_and_evolve(ladder, &prefix, &plan, &Excitation::Number(&occ, i), &ks, col, |k| -k);
    let (ket, d2) = excite_and_evolve(ladder, &prefix, &plan, &Excitation::Number(&occ, j), &ks, neg, |k| k);
    let forward = TwoTimeSeries {
        kind: CorrelatorKind::DensityForward,
        com_time: plan.com_time,
        grid,
        values: assemble(&plan, &ks, &column_dots(&bra, &ket), diagonal.then_some(1.0)),
        norm_drift: d1.max(d2),
    };

    let all = offsets(&plan, false);
    let (ket, d3) = excite_and_evolve(ladder, &prefix, &plan, &Excitation::Number(&occ, i), &all, col, |k| -2 * k);
    let dim = basis.dim();
    let mut bra = Mat::<c64>::zeros(dim, all.len());
    let mut input = vec![ZERO; dim];
    let mut buf = vec![ZERO; dim];
    for (c, &k) in all.iter().enumerate() {
        let src = neg(k);
        for (r, x) in input.iter_mut().enumerate() {
            *x = prefix[(r, src)];
        }
        Excitation::Number(&occ, j).apply(&input, &mut buf);
        for (r, &x) in buf.iter().enumerate() {
            bra[(r, c)] = x;
        }
    }
    let reversed = TwoTimeSeries {
        kind: CorrelatorKind::DensityReversed,
        com_time: plan.com_time,
        grid,
        values: assemble(&plan, &all, &column_dots(&bra, &ket), None),
        norm_drift: d3,
    };
    Ok(DensityPair { forward, reversed })
}

/// Uniform energy grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl EnergyGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi > lo) {
            return Err(Error::InvalidConfig(format!("bad energy grid [{lo}, {hi}] step {step}")));
        }
        let len = ((hi - lo) / step).round() as usize + 1;
        Ok(Self { start: lo, step, len })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn energy(&self, idx: usize) -> f64 {
        self.start + idx as f64 * self.step
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.energy(i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.start.abs().max(self.energy(self.len - 1).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn weight(self, tau: f64, tau_max: f64) -> f64 {
        match self {
            WindowKind::Rectangular => 1.0,
            WindowKind::Hann if tau_max == 0.0 => 1.0,
            WindowKind::Hann => 0.5 * (1.0 + (std::f64::consts::PI * tau / tau_max).cos()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorSpectrum {
    pub kind: CorrelatorKind,
    pub com_time: f64,
    pub energies: EnergyGrid,
    pub values: Vec<c64>,
    pub window: WindowKind,
    /// `w(0)`; an isolated line of unit strength integrates to `2 pi w(0)`.
    pub window_peak: f64,
}

impl CorrelatorSpectrum {
    /// Trapezoidal `integral F(E) dE` over the grid.
    pub fn integral(&self) -> c64 {
        let n = self.values.len();
        let mut acc = self.values.iter().sum::<c64>();
        if n > 1 {
            acc -= (self.values[0] + self.values[n - 1]) * 0.5;
        }
        acc * self.energies.step()
    }

    /// Line strength: integral over `[lo, hi]` divided by `2 pi w(0)`.
    pub fn weight_between(&self, lo: f64, hi: f64) -> c64 {
        let sum: c64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let e = self.energies.energy(*i);
                e >= lo && e <= hi
            })
            .map(|(_, v)| *v)
            .sum();
        sum * self.energies.step() / (std::f64::consts::TAU * self.window_peak)
    }
}

/// Windowed Riemann sum `sum_k w(tau_k) f(tau_k) e^{i E tau_k} dtau`.
pub fn to_energy(series: &TwoTimeSeries, energies: &EnergyGrid, window: WindowKind) -> Result<CorrelatorSpectrum> {
    let grid = series.grid;
    let product = energies.max_abs() * grid.step();
    if product > std::f64::consts::PI {
        return Err(Error::Aliasing { product });
    }
    let tau_max = grid.tau_max();
    let weighted: Vec<c64> =
        (0..grid.len()).map(|k| series.values[k] * window.weight(grid.tau(k), tau_max) * grid.step()).collect();
    let values = (0..energies.len())
        .map(|e| {
            let energy = energies.energy(e);
            let rot = c64::cis(energy * grid.step());
            let mut acc = ZERO;
            let mut phase = ZERO;
            for (k, &w) in weighted.iter().enumerate() {
                // Re-anchor the rotating phase periodically to bound rounding drift.
                if k % 64 == 0 {
                    phase = c64::cis(energy * grid.tau(k));
                } else {
                    phase *= rot;
                }
                acc += w * phase;
            }
            acc
        })
        .collect();
    Ok(CorrelatorSpectrum {
        kind: series.kind,
        com_time: series.com_time,
        energies: *energies,
        values,
        window,
        window_peak: window.weight(0.0, tau_max),
    })
}

/// Pointwise sum of the diagonal spectra over levels.
pub fn trace_levels(spectra: &[CorrelatorSpectrum]) -> Result<CorrelatorSpectrum> {
    let first = spectra.first().ok_or_else(|| Error::GridMismatch("no spectra to trace".into()))?;
    let mut out = first.clone();
    for s in &spectra[1..] {
        if s.energies != first.energies || s.kind != first.kind || s.window != first.window || s.com_time != first.com_time {
            return Err(Error::GridMismatch(format!("cannot trace {:?} with {:?}", s.kind, first.kind)));
        }
        for (a, b) in out.values.iter_mut().zip(&s.values) {
            *a += b;
        }
    }
    Ok(out)
}
