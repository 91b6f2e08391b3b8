//! Statistical fits: spectral lines, temperatures and relaxation envelopes.

mod fdt;
mod levels;
mod nullable;
mod lm;
mod lorentz;
mod relax;
mod timeline;

pub use fdt::{
    bose_einstein, fit_bose_einstein, fit_fdt_beta, fit_log_ratio, occupation_from_fdt, BosePoint, FdtOccupation,
    TemperatureFit, DEFAULT_FDT_WINDOW, MIN_FDT_POINTS, RATIO_TOLERANCE,
};
pub use levels::{level_occupation, LevelOccupation};
pub use lm::{levenberg_marquardt, multistart, FitOptions, LmOptions, LmSolution};
pub use lorentz::{default_seeds, fit_lorentzian_points, fit_lorentzians, lorentzian, Peak, PeakSet};
pub use relax::{
    fit_biexponential, plateau_stats, PlateauStats, RelaxationFit, DEFAULT_TAIL_FRACTION, MIN_RELAX_POINTS,
    MIN_TAIL_POINTS,
};
pub use timeline::{temperature_timeline, FdtSample, TimelineEntry};
