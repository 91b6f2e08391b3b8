//! Run description, parsed from TOML. Mode indices are 1-based here and
//! converted to 0-based on use.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::correlators::WindowKind;
use crate::error::{Error, Result};
use crate::fock::{sector_dimension, DEFAULT_DIMENSION_CAP};
use crate::hamiltonian::HamiltonianParams;
use crate::propagator::{PropagatorConfig, StepNorm};
use crate::states::{PhaseChoice, DEFAULT_SPECTRUM_THRESHOLD};
use crate::thermofit::{FitOptions, LmOptions, DEFAULT_FDT_WINDOW, DEFAULT_TAIL_FRACTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    pub initial_state: InitialStateConfig,
    #[serde(default)]
    pub measurement: MeasurementConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub limits: Limits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub modes: usize,
    pub particles: usize,
    #[serde(default = "default_spacing")]
    pub level_spacing: f64,
    #[serde(default = "one")]
    pub hopping: f64,
    #[serde(default = "one")]
    pub intra: f64,
    #[serde(default = "default_inter")]
    pub inter: f64,
}

fn default_spacing() -> f64 {
    10.0
}

fn one() -> f64 {
    1.0
}

fn default_inter() -> f64 {
    0.1
}

impl ModelConfig {
    pub fn params(&self, particles: usize) -> HamiltonianParams {
        HamiltonianParams {
            level_spacing: self.level_spacing,
            hopping: self.hopping,
            intra: self.intra,
            inter: self.inter,
            num_modes: self.modes,
            num_particles: particles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub dt: f64,
    pub taylor_order: usize,
    pub branching: usize,
    pub depth: usize,
    pub step_norm: StepNorm,
    pub renormalize: bool,
    /// Round off-lattice times to the nearest reachable time instead of failing.
    pub snap: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            // 0.005 / 256: half of the default tau step is exactly 256 base steps.
            dt: 1.953125e-5,
            taylor_order: 4,
            branching: 2,
            depth: 26,
            step_norm: StepNorm::MaxElement,
            renormalize: false,
            snap: true,
        }
    }
}

impl PropagationConfig {
    pub fn propagator(&self, depth: usize, rung_memory_cap: usize) -> PropagatorConfig {
        PropagatorConfig {
            dt: self.dt,
            taylor_order: self.taylor_order,
            branching: self.branching,
            depth,
            step_norm: self.step_norm,
            renormalize: self.renormalize,
            rung_memory_cap,
        }
    }

    /// Smallest depth whose top rung does not exceed `max_time`, capped by the configured depth.
    pub fn depth_for(&self, max_time: f64) -> usize {
        let steps = (max_time / self.dt).ceil().max(1.0);
        let mut depth = 0;
        let mut reach = 1.0;
        while depth < self.depth && reach * (self.branching as f64) <= steps {
            reach *= self.branching as f64;
            depth += 1;
        }
        depth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateConfig {
    Occupation {
        occupation: Vec<u32>,
    },
    Microcanonical {
        window: (f64, f64),
        #[serde(default)]
        phases: PhaseChoice,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGrid {
    Linear { start: f64, stop: f64, count: usize },
    /// Logarithmic spacing from `start > 0`; `t = 0` is prepended.
    Log { start: f64, stop: f64, count: usize },
    List { values: Vec<f64> },
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        match self {
            TimeGrid::Linear { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                _ => (0..*count).map(|k| start + (stop - start) * k as f64 / (*count - 1) as f64).collect(),
            },
            TimeGrid::Log { start, stop, count } => {
                let mut out = vec![0.0];
                if *count == 1 {
                    out.push(*start);
                } else if *count > 1 {
                    let (a, b) = (start.ln(), stop.ln());
                    out.extend((0..*count).map(|k| (a + (b - a) * k as f64 / (*count - 1) as f64).exp()));
                }
                out
            }
            TimeGrid::List { values } => values.clone(),
        }
    }
}

/// Quantities logged along the time grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Occupations,
    /// Total occupation of the system modes.
    SystemOccupation,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Observed subsystem (1-based).
    pub system_modes: Vec<usize>,
    pub observables: Vec<Observable>,
    pub times: TimeGrid,
    pub correlator_times: Vec<f64>,
    /// Single-particle pairs `(i, j)`, 1-based.
    pub pairs: Vec<(usize, usize)>,
    pub density_pairs: Vec<(usize, usize)>,
    pub tau_max: f64,
    pub tau_step: f64,
    pub energy_min: f64,
    pub energy_max: f64,
    pub energy_step: f64,
    pub window: WindowKind,
    pub spectrum_threshold: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            system_modes: Vec::new(),
            observables: vec![Observable::Occupations, Observable::SystemOccupation, Observable::Entropy],
            times: TimeGrid::Linear { start: 0.0, stop: 10.0, count: 101 },
            correlator_times: Vec::new(),
            pairs: Vec::new(),
            density_pairs: Vec::new(),
            tau_max: 10.0,
            tau_step: 0.01,
            energy_min: -50.0,
            energy_max: 150.0,
            energy_step: 0.02,
            window: WindowKind::Hann,
            spectrum_threshold: DEFAULT_SPECTRUM_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Levels fitted for thermometry, lowest first; `None` means all modes.
    pub peak_count: Option<usize>,
    /// Fit window half-width around each level peak (units of J).
    pub peak_half_window: f64,
    pub fdt_window: (f64, f64),
    pub tail_fraction: f64,
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            peak_count: None,
            peak_half_window: 5.0,
            fdt_window: DEFAULT_FDT_WINDOW,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            restarts: 8,
            max_iterations: 500,
        }
    }
}

impl FitConfig {
    pub fn options(&self, seed: u64) -> FitOptions {
        FitOptions {
            seed,
            restarts: self.restarts,
            lm: LmOptions { max_iterations: self.max_iterations, ..LmOptions::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_dimension: usize,
    /// Upper bound on the bytes held by all propagator rungs of one stage.
    pub memory_bytes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_dimension: DEFAULT_DIMENSION_CAP, memory_bytes: 4 << 30 }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn check_mode(mode: usize, m: usize, what: &str) -> Result<()> {
    if mode == 0 || mode > m {
        return Err(Error::InvalidConfig(format!("{what}: mode {mode} outside 1..={m}")));
    }
    Ok(())
}

impl RunConfig {
    /// Checks every field without allocating any sector.
    pub fn validate(&self) -> Result<()> {
        let m = self.model.modes;
        let n = self.model.particles;
        self.model.params(n).validate()?;
        let p = &self.propagation;
        self.propagation.propagator(p.depth, usize::MAX).validate()?;

        let meas = &self.measurement;
        for &s in &meas.system_modes {
            check_mode(s, m, "system_modes")?;
        }
        if !meas.system_modes.is_empty() && meas.system_modes.len() >= m {
            return Err(Error::InvalidConfig("system_modes must be a proper subset".into()));
        }
        let needs_system = meas.observables.iter().any(|o| matches!(o, Observable::Entropy | Observable::SystemOccupation));
        if needs_system && meas.system_modes.is_empty() {
            return Err(Error::InvalidConfig("entropy and system_occupation need system_modes".into()));
        }
        for &(i, j) in meas.pairs.iter().chain(&meas.density_pairs) {
            check_mode(i, m, "pairs")?;
            check_mode(j, m, "pairs")?;
        }
        match &meas.times {
            TimeGrid::Linear { start, stop, .. } if !(*start >= 0.0 && stop >= start) => {
                return Err(Error::InvalidConfig("linear time grid needs 0 <= start <= stop".into()))
            }
            TimeGrid::Log { start, stop, .. } if !(*start > 0.0 && stop >= start) => {
                return Err(Error::InvalidConfig("log time grid needs 0 < start <= stop".into()))
            }
            _ => {}
        }
        let times = meas.times.times();
        if times.iter().chain(&meas.correlator_times).any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidConfig("times must be finite and nonnegative".into()));
        }
        if !(meas.tau_step > 0.0 && meas.tau_max >= 0.0) {
            return Err(Error::InvalidConfig("tau grid needs tau_step > 0 and tau_max >= 0".into()));
        }
        if !(meas.energy_step > 0.0 && meas.energy_max > meas.energy_min) {
            return Err(Error::InvalidConfig("energy grid needs energy_step > 0 and energy_max > energy_min".into()));
        }
        let nyquist = meas.energy_min.abs().max(meas.energy_max.abs()) * meas.tau_step;
        if nyquist > std::f64::consts::PI {
            return Err(Error::Aliasing { product: nyquist });
        }
        if !(meas.spectrum_threshold >= 0.0) {
            return Err(Error::InvalidConfig("spectrum_threshold must be nonnegative".into()));
        }

        match &self.initial_state {
            InitialStateConfig::Occupation { occupation } => {
                if occupation.len() != m {
                    return Err(Error::InvalidTuple(format!("occupation has {} entries, model has {m} modes", occupation.len())));
                }
                let total: u64 = occupation.iter().map(|&x| u64::from(x)).sum();
                if total != n as u64 {
                    return Err(Error::InvalidTuple(format!("occupation holds {total} particles, model has {n}")));
                }
            }
            InitialStateConfig::Microcanonical { window: (lo, hi), .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::InvalidConfig(format!("bad energy window [{lo}, {hi}]")));
                }
            }
        }

        let f = &self.fit;
        if !(f.tail_fraction > 0.0 && f.tail_fraction <= 1.0) {
            return Err(Error::InvalidConfig("tail_fraction must lie in (0, 1]".into()));
        }
        if f.peak_count.is_some_and(|c| c == 0 || c > m) {
            return Err(Error::InvalidConfig(format!("peak_count must lie in 1..={m}")));
        }
        if !(f.fdt_window.0 < f.fdt_window.1) || !(f.peak_half_window > 0.0) {
            return Err(Error::InvalidConfig("fit windows must be nonempty".into()));
        }

        // Sector sizes and rung memory, before anything is allocated.
        let needs_neighbours = !meas.correlator_times.is_empty() && !meas.pairs.is_empty();
        let sectors: Vec<usize> = if needs_neighbours { (n.saturating_sub(1)..=n + 1).collect() } else { vec![n] };
        let mut bytes = 0u128;
        for k in sectors {
            let dim = sector_dimension(m, k);
            if dim > self.limits.max_dimension as u64 {
                return Err(Error::Capacity { dimension: dim, cap: self.limits.max_dimension });
            }
            bytes += u128::from(dim) * u128::from(dim) * 16 * (p.depth as u128 + 1);
        }
        if bytes > self.limits.memory_bytes as u128 {
            return Err(Error::MemoryCap { bytes: bytes.min(usize::MAX as u128) as usize, cap: self.limits.memory_bytes });
        }
        Ok(())
    }
}

/// Parses a 1-based `"i,j"` mode pair.
pub fn parse_pair(text: &str) -> Result<(usize, usize)> {
    let mut parts = text.split(',');
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::parse("pair", format!("expected `i,j`, got {text:?}")));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|e| Error::parse("pair", format!("{s:?}: {e}")))
            .and_then(|v| if v == 0 { Err(Error::parse("pair", "modes are 1-based")) } else { Ok(v) })
    };
    Ok((num(a)?, num(b)?))
}
