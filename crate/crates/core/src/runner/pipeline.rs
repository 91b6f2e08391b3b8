//! Stages of a run. Each stage reads what earlier stages persisted under the
//! output directory, so any of them can be re-run on its own.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use faer::c64;
use serde::{Deserialize, Serialize};

use super::config::{InitialStateConfig, Observable, RunConfig, TimeGrid};
use super::manifest::{csv_schemas, inventory, DriftSummary, RunManifest, StageRecord, StageStatus};
use super::table::{read_table, CsvTable};
use crate::correlators::{
    density_correlators, keldysh_and_spectral, single_particle_batch, to_energy, CorrelatorKind, CorrelatorSpectrum,
    EnergyGrid, ModeVector, SectorLadders, TauGrid, TwoTimeSeries,
};
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::hamiltonian::{build_hamiltonian, diagonalize, r_ratio, ChaosReport, SectorOperator};
use crate::linalg::hermitian_eigenvalues;
use crate::partition::{build_partition, entanglement_entropy, reduced_density};
use crate::propagator::{build_ladder, lattice_steps, DriftReport, PropagatorLadder};
use crate::states::{microcanonical_state, occupation_state, state_spectrum};
use crate::fock::StateVector;
use crate::thermofit::{
    fit_biexponential, fit_bose_einstein, level_occupation, plateau_stats, temperature_timeline, BosePoint, FdtSample,
    LevelOccupation, PlateauStats, RelaxationFit, TemperatureFit, TimelineEntry,
};

pub const INITIAL_STATE: &str = "state/initial.csv";
pub const STATE_SPECTRUM: &str = "state/spectrum.csv";
pub const STATE_SUMMARY: &str = "state/summary.json";
pub const DIAGONAL_ENSEMBLE: &str = "state/diagonal_ensemble.csv";
pub const EIGENVALUES: &str = "spectrum/eigenvalues.csv";
pub const CHAOS_REPORT: &str = "spectrum/chaos.json";
pub const OBSERVABLES: &str = "evolve/observables.csv";
pub const ENTROPY: &str = "evolve/entropy.csv";
pub const GREENS_INDEX: &str = "greens/index.json";
pub const FDT_TIMELINE: &str = "thermometry/fdt_timeline.json";
pub const ENTROPY_FIT: &str = "fits/entropy_biexp.json";
pub const SYSTEM_OCCUPATION_FIT: &str = "fits/system_occupation_biexp.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    BuildSpectrum,
    Chaos,
    Evolve,
    Greens,
    Thermometry,
    Fit,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::BuildSpectrum, Stage::Chaos, Stage::Evolve, Stage::Greens, Stage::Thermometry, Stage::Fit];

    pub fn name(self) -> &'static str {
        match self {
            Stage::BuildSpectrum => "build-spectrum",
            Stage::Chaos => "chaos",
            Stage::Evolve => "evolve",
            Stage::Greens => "greens",
            Stage::Thermometry => "thermometry",
            Stage::Fit => "fit",
        }
    }
}

/// Label used in per-time file names, e.g. `t100` or `t0.5`.
pub fn time_label(t: f64) -> String {
    format!("t{t}")
}

pub fn series_path(kind: CorrelatorKind, pair: (usize, usize), t: f64) -> String {
    format!("greens/{}_{}_{}_{}.csv", kind.name(), pair.0, pair.1, time_label(t))
}

pub fn spectrum_path(kind: CorrelatorKind, pair: (usize, usize), t: f64) -> String {
    format!("spectra/{}_{}_{}_{}.csv", kind.name(), pair.0, pair.1, time_label(t))
}

pub fn levels_path(t: f64) -> String {
    format!("thermometry/levels_{}.csv", time_label(t))
}

pub fn bose_fit_path(t: f64) -> String {
    format!("thermometry/bose_{}.json", time_label(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub dimension: usize,
    pub energy: f64,
    pub mean_energy: f64,
    pub energy_width: f64,
    pub levels_listed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosSummary {
    pub particles: usize,
    pub dimension: usize,
    #[serde(flatten)]
    pub report: ChaosReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreensEntry {
    pub requested_time: f64,
    pub com_time: f64,
    pub kind: CorrelatorKind,
    /// 1-based modes.
    pub pair: (usize, usize),
    pub series: String,
    pub spectrum: String,
    pub norm_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub mode: usize,
    pub level: Option<LevelOccupation>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoseReport {
    pub com_time: f64,
    pub levels: Vec<LevelReport>,
    /// Levels with nonpositive energy cannot enter a Bose-Einstein fit.
    pub excluded_modes: Vec<usize>,
    pub fit: Option<TemperatureFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub source: String,
    pub column: String,
    pub plateau: Option<PlateauStats>,
    pub fit: Option<RelaxationFit>,
    pub error: Option<String>,
}

/// Owns one output directory for the duration of a run.
pub struct Pipeline {
    config: RunConfig,
    root: PathBuf,
    resolved: RunConfig,
    stages: Vec<StageRecord>,
    drift: DriftSummary,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn max_opt(a: Option<f64>, b: f64) -> Option<f64> {
    Some(a.map_or(b, |a| a.max(b)))
}

fn error_text(e: &Error) -> String {
    e.to_string()
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let root = config.output_dir.clone();
        Ok(Self { resolved: config.clone(), config, root, stages: Vec::new(), drift: DriftSummary::default() })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn require(&self, rel: &str, stage: Stage) -> Result<PathBuf> {
        let path = self.path(rel);
        if path.exists() {
            Ok(path)
        } else {
            Err(Error::MissingArtifact { path, stage: stage.name() })
        }
    }

    fn basis(&self, particles: usize) -> Result<Arc<FockBasis>> {
        Ok(Arc::new(FockBasis::with_cap(self.config.model.modes, particles, self.config.limits.max_dimension)?))
    }

    fn hamiltonian(&self, particles: usize) -> Result<SectorOperator> {
        build_hamiltonian(&self.config.model.params(particles), &self.basis(particles)?)
    }

    fn ladder(&self, h: &SectorOperator, max_time: f64) -> Result<PropagatorLadder> {
        let p = &self.config.propagation;
        build_ladder(h, &p.propagator(p.depth_for(max_time), self.config.limits.memory_bytes))
    }

    fn load_initial(&self, basis: &Arc<FockBasis>) -> Result<StateVector> {
        let table = read_table(&self.require(INITIAL_STATE, Stage::BuildSpectrum)?)?;
        let (re, im) = (table.column("re")?, table.column("im")?);
        if re.len() != basis.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{INITIAL_STATE} has {} amplitudes, sector has {}",
                re.len(),
                basis.dim()
            )));
        }
        StateVector::new(basis.clone(), re.into_iter().zip(im).map(|(r, i)| c64::new(r, i)).collect())
    }

    /// Runs one stage and records its outcome.
    pub fn run_stage(&mut self, stage: Stage) -> Result<()> {
        let start = Instant::now();
        log::info!("stage {} started", stage.name());
        let result = match stage {
            Stage::BuildSpectrum => self.build_spectrum(),
            Stage::Chaos => self.chaos(),
            Stage::Evolve => self.evolve(),
            Stage::Greens => self.greens(),
            Stage::Thermometry => self.thermometry(),
            Stage::Fit => self.fit(),
        };
        let wall_seconds = start.elapsed().as_secs_f64();
        log::info!("stage {} finished in {wall_seconds:.3} s", stage.name());
        self.stages.push(StageRecord {
            name: stage.name().to_string(),
            status: if result.is_ok() { StageStatus::Ok } else { StageStatus::Failed },
            wall_seconds,
            error: result.as_ref().err().map(error_text),
        });
        result
    }

    /// Runs `stages` in order, stopping at the first failure; the manifest is
    /// written either way. A failed chaos diagnostic is recorded without
    /// stopping a multi-stage run.
    pub fn run_stages(&mut self, stages: &[Stage]) -> Result<RunManifest> {
        std::fs::create_dir_all(&self.root)?;
        let mut failure = None;
        for &stage in stages {
            if let Err(e) = self.run_stage(stage) {
                if stage == Stage::Chaos && stages.len() > 1 {
                    log::warn!("chaos diagnostic failed: {e}");
                    continue;
                }
                failure = Some(e);
                break;
            }
        }
        let manifest = self.write_manifest()?;
        match failure {
            Some(e) => Err(e),
            None => Ok(manifest),
        }
    }

    pub fn write_manifest(&self) -> Result<RunManifest> {
        let files = inventory(&self.root)?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            csv_schema_version: super::manifest::CSV_SCHEMA_VERSION,
            resolved_config: self.resolved.clone(),
            stages: self.stages.clone(),
            drift: self.drift,
            csv_schemas: csv_schemas(&self.root, &files)?,
            files,
        };
        manifest.write(&self.root)?;
        Ok(manifest)
    }

    fn build_spectrum(&mut self) -> Result<()> {
        let cfg = &self.config;
        let h = self.hamiltonian(cfg.model.particles)?;
        let eig = diagonalize(&h)?;
        let basis = h.basis().clone();
        let psi = match &cfg.initial_state {
            InitialStateConfig::Occupation { occupation } => occupation_state(&basis, occupation)?,
            InitialStateConfig::Microcanonical { window: (lo, hi), phases } => {
                microcanonical_state(&eig, *lo, *hi, *phases)?
            }
        };

        let mut values = CsvTable::new(&["index", "E_over_J"]);
        for (k, &e) in eig.values().iter().enumerate() {
            values.push(vec![k as f64, e]);
        }
        values.write(&self.path(EIGENVALUES))?;

        let mut amps = CsvTable::new(&["index", "re", "im"]);
        for (k, a) in psi.amplitudes().iter().enumerate() {
            amps.push(vec![k as f64, a.re, a.im]);
        }
        amps.write(&self.path(INITIAL_STATE))?;

        let spectrum = state_spectrum(&eig, &psi, cfg.measurement.spectrum_threshold)?;
        let mut weights = CsvTable::new(&["E_over_J", "weight"]);
        for w in &spectrum.levels {
            weights.push(vec![w.energy, w.weight]);
        }
        weights.write(&self.path(STATE_SPECTRUM))?;

        // Infinite-time average: sum_a |c_a|^2 <a|n_i|a>.
        let coefficients = eig.coefficients(psi.amplitudes());
        let vectors = eig.vectors();
        let m = cfg.model.modes;
        let mut diag = vec![0.0; m];
        for (a, c) in coefficients.iter().enumerate() {
            let p = c.norm_sqr();
            for b in 0..basis.dim() {
                let w = p * vectors[(b, a)].norm_sqr();
                for (i, &n) in basis.state(b).iter().enumerate() {
                    diag[i] += w * f64::from(n);
                }
            }
        }
        let mut de = CsvTable::new(&["mode", "n_diag"]);
        for (i, n) in diag.iter().enumerate() {
            de.push(vec![(i + 1) as f64, *n]);
        }
        de.write(&self.path(DIAGONAL_ENSEMBLE))?;

        let summary = StateSummary {
            dimension: basis.dim(),
            energy: h.expectation(psi.amplitudes()).re,
            mean_energy: spectrum.mean_energy,
            energy_width: spectrum.width,
            levels_listed: spectrum.levels.len(),
        };
        write_json(&self.path(STATE_SUMMARY), &summary)
    }

    fn chaos(&mut self) -> Result<()> {
        let n = self.config.model.particles;
        let eigen_path = self.path(EIGENVALUES);
        let values = if eigen_path.exists() {
            read_table(&eigen_path)?.column("E_over_J")?
        } else {
            let h = self.hamiltonian(n)?;
            h.check_hermitian()?;
            hermitian_eigenvalues(h.matrix())?
        };
        let summary = ChaosSummary { particles: n, dimension: values.len(), report: r_ratio(&values)? };
        log::info!("mean r = {:.4}", summary.report.mean_r);
        write_json(&self.path(CHAOS_REPORT), &summary)
    }

    fn evolve(&mut self) -> Result<()> {
        let cfg = self.config.clone();
        let meas = &cfg.measurement;
        let h = self.hamiltonian(cfg.model.particles)?;
        let basis = h.basis().clone();
        let psi0 = self.load_initial(&basis)?;
        let times = meas.times.times();
        let max_t = times.iter().copied().fold(0.0, f64::max);
        let ladder = self.ladder(&h, max_t)?;
        let system: Vec<usize> = meas.system_modes.iter().map(|&s| s - 1).collect();
        let partition = if system.is_empty() { None } else { Some(build_partition(&basis, &system)?) };
        let wants = |o: Observable| meas.observables.contains(&o);
        let m = cfg.model.modes;

        let mut header = vec!["Jt".to_string(), "norm".to_string(), "energy".to_string()];
        if wants(Observable::Occupations) {
            header.extend((1..=m).map(|i| format!("n_{i}")));
        }
        if wants(Observable::SystemOccupation) {
            header.push("n_sys".into());
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut observables = CsvTable::new(&header_refs);
        let mut entropy = CsvTable::new(&["Jt", "S", "S_max_bound"]);

        let mut drift = DriftReport::new(h.expectation(psi0.amplitudes()).re);
        let mut snapped = Vec::with_capacity(times.len());
        for &t in &times {
            let (steps, actual) = lattice_steps(ladder.dt(), t, cfg.propagation.snap)?;
            snapped.push(actual);
            let amps = ladder.evolve_steps(psi0.amplitudes(), steps);
            drift.record(&h, &amps);
            let psi = StateVector::new(basis.clone(), amps)?;
            let mut row = vec![actual, psi.norm(), h.expectation(psi.amplitudes()).re];
            let occ = psi.occupations();
            if wants(Observable::Occupations) {
                row.extend_from_slice(&occ);
            }
            if wants(Observable::SystemOccupation) {
                row.push(system.iter().map(|&s| occ[s]).sum());
            }
            observables.push(row);
            if let (Some(pm), true) = (&partition, wants(Observable::Entropy)) {
                let rho = reduced_density(&psi.normalized(), pm)?;
                entropy.push(vec![actual, entanglement_entropy(&rho)?, pm.entropy_bound()]);
            }
        }
        observables.write(&self.path(OBSERVABLES))?;
        if wants(Observable::Entropy) {
            entropy.write(&self.path(ENTROPY))?;
        }
        log::info!("norm drift {:.3e}, relative energy drift {:.3e}", drift.max_norm_drift, drift.max_energy_drift);
        self.drift.max_norm_drift = max_opt(self.drift.max_norm_drift, drift.max_norm_drift);
        self.drift.max_relative_energy_drift = max_opt(self.drift.max_relative_energy_drift, drift.max_energy_drift);
        self.resolved.measurement.times = TimeGrid::List { values: snapped };
        Ok(())
    }

    fn grids(&self) -> Result<(TauGrid, EnergyGrid)> {
        let m = &self.config.measurement;
        Ok((TauGrid::new(m.tau_max, m.tau_step)?, EnergyGrid::new(m.energy_min, m.energy_max, m.energy_step)?))
    }

    fn write_correlator(
        &self,
        series: &TwoTimeSeries,
        energies: &EnergyGrid,
        pair: (usize, usize),
        requested: f64,
        index: &mut Vec<GreensEntry>,
    ) -> Result<()> {
        let series_rel = series_path(series.kind, pair, requested);
        let spectrum_rel = spectrum_path(series.kind, pair, requested);
        let mut st = CsvTable::new(&["tau_J", "re", "im"]);
        for (k, v) in series.values.iter().enumerate() {
            st.push(vec![series.grid.tau(k), v.re, v.im]);
        }
        st.write(&self.path(&series_rel))?;
        let spectrum = to_energy(series, energies, self.config.measurement.window)?;
        let mut sp = CsvTable::new(&["E_over_J", "re", "im"]);
        for (k, v) in spectrum.values.iter().enumerate() {
            sp.push(vec![energies.energy(k), v.re, v.im]);
        }
        sp.write(&self.path(&spectrum_rel))?;
        index.push(GreensEntry {
            requested_time: requested,
            com_time: series.com_time,
            kind: series.kind,
            pair,
            series: series_rel,
            spectrum: spectrum_rel,
            norm_drift: series.norm_drift,
        });
        Ok(())
    }

    fn greens(&mut self) -> Result<()> {
        let cfg = self.config.clone();
        let meas = &cfg.measurement;
        if meas.correlator_times.is_empty() || (meas.pairs.is_empty() && meas.density_pairs.is_empty()) {
            return write_json(&self.path(GREENS_INDEX), &Vec::<GreensEntry>::new());
        }
        let (grid, energies) = self.grids()?;
        let n = cfg.model.particles;
        let m = cfg.model.modes;
        let snap = cfg.propagation.snap;
        let reach = meas.correlator_times.iter().copied().fold(0.0, f64::max) + grid.tau_max();

        let h = self.hamiltonian(n)?;
        let psi0 = self.load_initial(h.basis())?;
        let middle = self.ladder(&h, reach)?;
        let (lower, upper) = if meas.pairs.is_empty() {
            (None, None)
        } else {
            let upper = self.ladder(&self.hamiltonian(n + 1)?, reach)?;
            let lower = if n > 0 { Some(self.ladder(&self.hamiltonian(n - 1)?, reach)?) } else { None };
            (lower, Some(upper))
        };

        let mode_pairs: Vec<(ModeVector, ModeVector)> =
            meas.pairs.iter().map(|&(i, j)| (ModeVector::unit(i - 1, m), ModeVector::unit(j - 1, m))).collect();
        let mut index = Vec::new();
        let mut snapped = Vec::with_capacity(meas.correlator_times.len());
        for &t in &meas.correlator_times {
            let mut actual = lattice_steps(middle.dt(), t, snap)?.1;
            if let Some(upper) = &upper {
                let ladders = SectorLadders { lower: lower.as_ref(), middle: &middle, upper };
                let (plan, greens) = single_particle_batch(&psi0, &ladders, &mode_pairs, t, grid, snap)?;
                actual = plan.com_time;
                for (&pair, g) in meas.pairs.iter().zip(&greens) {
                    let (k, a) = keldysh_and_spectral(&g.lesser, &g.greater)?;
                    for s in [&g.lesser, &g.greater, &k, &a] {
                        self.write_correlator(s, &energies, pair, t, &mut index)?;
                    }
                }
            }
            for &(i, j) in &meas.density_pairs {
                let d = density_correlators(&psi0, &middle, (i - 1, j - 1), t, grid, snap)?;
                for s in [&d.forward, &d.reversed] {
                    self.write_correlator(s, &energies, (i, j), t, &mut index)?;
                }
            }
            snapped.push(actual);
        }
        let worst = index.iter().map(|e| e.norm_drift).fold(0.0, f64::max);
        self.drift.max_correlator_norm_drift = max_opt(self.drift.max_correlator_norm_drift, worst);
        self.resolved.measurement.correlator_times = snapped;
        write_json(&self.path(GREENS_INDEX), &index)
    }

    fn read_spectrum(&self, kind: CorrelatorKind, pair: (usize, usize), t: f64, energies: &EnergyGrid) -> Result<CorrelatorSpectrum> {
        let table = read_table(&self.require(&spectrum_path(kind, pair, t), Stage::Greens)?)?;
        let es = table.column("E_over_J")?;
        let aligned = es.len() == energies.len()
            && es.iter().enumerate().all(|(k, e)| (e - energies.energy(k)).abs() <= 1e-9 * (1.0 + e.abs()));
        if !aligned {
            return Err(Error::GridMismatch(format!("{} does not match the configured energy grid", spectrum_path(kind, pair, t))));
        }
        let (re, im) = (table.column("re")?, table.column("im")?);
        let window = self.config.measurement.window;
        Ok(CorrelatorSpectrum {
            kind,
            com_time: t,
            energies: *energies,
            values: re.into_iter().zip(im).map(|(r, i)| c64::new(r, i)).collect(),
            window,
            window_peak: window.weight(0.0, self.config.measurement.tau_max),
        })
    }

    fn thermometry(&mut self) -> Result<()> {
        let cfg = self.config.clone();
        let meas = &cfg.measurement;
        let (_, energies) = self.grids()?;
        let opts = cfg.fit.options(cfg.seed);
        let peak_count = cfg.fit.peak_count.unwrap_or(cfg.model.modes);
        let levels: Vec<usize> = (1..=peak_count).filter(|&i| meas.pairs.contains(&(i, i))).collect();

        for &t in &meas.correlator_times {
            if levels.is_empty() {
                break;
            }
            let mut reports = Vec::new();
            let mut points: Vec<BosePoint> = Vec::new();
            let mut excluded = Vec::new();
            for &i in &levels {
                let k = self.read_spectrum(CorrelatorKind::Keldysh, (i, i), t, &energies)?;
                let a = self.read_spectrum(CorrelatorKind::Spectral, (i, i), t, &energies)?;
                match level_occupation(&k, &a, cfg.fit.peak_half_window, &opts) {
                    Ok(level) => {
                        if level.energy > 0.0 {
                            points.push(level.bose_point());
                        } else {
                            excluded.push(i);
                        }
                        reports.push(LevelReport { mode: i, level: Some(level), error: None });
                    }
                    Err(e) => reports.push(LevelReport { mode: i, level: None, error: Some(error_text(&e)) }),
                }
            }
            let mut table = CsvTable::new(&["E_over_J", "n_B", "sigma"]);
            for p in &points {
                table.push(vec![p.energy, p.occupation, p.sigma]);
            }
            table.write(&self.path(&levels_path(t)))?;
            let (fit, error) = match fit_bose_einstein(&points, &opts.lm) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(error_text(&e))),
            };
            let report = BoseReport { com_time: t, levels: reports, excluded_modes: excluded, fit, error };
            write_json(&self.path(&bose_fit_path(t)), &report)?;
        }

        if !meas.density_pairs.is_empty() {
            let mut samples = Vec::new();
            for &t in &meas.correlator_times {
                for &pair in &meas.density_pairs {
                    // In equilibrium the reversed ordering carries the Boltzmann factor.
                    samples.push(FdtSample {
                        com_time: t,
                        label: format!("n_{},n_{}", pair.0, pair.1),
                        numerator: self.read_spectrum(CorrelatorKind::DensityReversed, pair, t, &energies)?,
                        denominator: self.read_spectrum(CorrelatorKind::DensityForward, pair, t, &energies)?,
                    });
                }
            }
            let timeline: Vec<TimelineEntry> = temperature_timeline(&samples, cfg.fit.fdt_window);
            write_json(&self.path(FDT_TIMELINE), &timeline)?;
        }
        Ok(())
    }

    fn relaxation(&self, rel: &str, column: &str) -> Result<RelaxationReport> {
        let table = read_table(&self.require(rel, Stage::Evolve)?)?;
        let times = table.column("Jt")?;
        let values = table.column(column)?;
        let mut report =
            RelaxationReport { source: rel.to_string(), column: column.to_string(), plateau: None, fit: None, error: None };
        match plateau_stats(&values, self.config.fit.tail_fraction) {
            Ok(p) => {
                report.plateau = Some(p);
                match fit_biexponential(&times, &values, p.mean, &self.config.fit.options(self.config.seed)) {
                    Ok(f) => report.fit = Some(f),
                    Err(e) => report.error = Some(error_text(&e)),
                }
            }
            Err(e) => report.error = Some(error_text(&e)),
        }
        Ok(report)
    }

    fn fit(&mut self) -> Result<()> {
        let obs = &self.config.measurement.observables;
        if obs.contains(&Observable::Entropy) {
            write_json(&self.path(ENTROPY_FIT), &self.relaxation(ENTROPY, "S")?)?;
        }
        if obs.contains(&Observable::SystemOccupation) {
            write_json(&self.path(SYSTEM_OCCUPATION_FIT), &self.relaxation(OBSERVABLES, "n_sys")?)?;
        }
        Ok(())
    }
}

/// Every stage in order, then the manifest.
pub fn run(config: RunConfig) -> Result<RunManifest> {
    Pipeline::new(config)?.run_stages(&Stage::ALL)
}
