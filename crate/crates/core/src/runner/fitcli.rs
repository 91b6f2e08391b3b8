//! Stand-alone fits of a CSV table, independent of any run directory.

use serde::Serialize;

use super::table::CsvTable;
use crate::error::{Error, Result};
use crate::thermofit::{
    fit_biexponential, fit_bose_einstein, fit_log_ratio, plateau_stats, BosePoint, FitOptions, PlateauStats,
    RelaxationFit, TemperatureFit,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// Columns `(t, y)`: two-timescale relaxation toward the tail plateau.
    Biexp,
    /// Columns `(E, n, sigma)`: single-temperature Bose-Einstein occupation.
    Bose,
    /// Columns `(E, f, r)` with `f = e^{-beta E} r` in equilibrium.
    Fdt,
}

impl std::str::FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "biexp" => Ok(Self::Biexp),
            "bose" => Ok(Self::Bose),
            "fdt" => Ok(Self::Fdt),
            other => Err(Error::parse("fit model", format!("{other:?} is not one of biexp, bose, fdt"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitReport {
    Biexp { plateau: PlateauStats, fit: RelaxationFit },
    Bose { fit: TemperatureFit },
    Fdt { fit: TemperatureFit },
}

/// Fits the leading columns of `table`; header names are not interpreted.
pub fn fit_table(
    table: &CsvTable,
    model: FitModel,
    opts: &FitOptions,
    tail_fraction: f64,
    window: Option<(f64, f64)>,
) -> Result<FitReport> {
    match model {
        FitModel::Biexp => {
            let (t, y) = (table.nth_column(0)?, table.nth_column(1)?);
            let plateau = plateau_stats(&y, tail_fraction)?;
            let fit = fit_biexponential(&t, &y, plateau.mean, opts)?;
            Ok(FitReport::Biexp { plateau, fit })
        }
        FitModel::Bose => {
            let (e, n, s) = (table.nth_column(0)?, table.nth_column(1)?, table.nth_column(2)?);
            let points: Vec<BosePoint> = (0..e.len())
                .filter(|&k| window.is_none_or(|(lo, hi)| e[k] >= lo && e[k] <= hi))
                .map(|k| BosePoint { energy: e[k], occupation: n[k], sigma: s[k] })
                .collect();
            Ok(FitReport::Bose { fit: fit_bose_einstein(&points, &opts.lm)? })
        }
        FitModel::Fdt => {
            let (e, f, r) = (table.nth_column(0)?, table.nth_column(1)?, table.nth_column(2)?);
            let samples: Vec<(f64, f64, f64)> = (0..e.len())
                .filter(|&k| f[k] > 0.0 && r[k] > 0.0)
                .filter(|&k| window.is_none_or(|(lo, hi)| e[k] >= lo && e[k] <= hi))
                .map(|k| (e[k], f[k], r[k]))
                .collect();
            Ok(FitReport::Fdt { fit: fit_log_ratio(&samples, window)? })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names() {
        assert_eq!("bose".parse::<FitModel>().unwrap(), FitModel::Bose);
        assert!("gauss".parse::<FitModel>().is_err());
    }

    #[test]
    fn fdt_table() {
        let mut t = CsvTable::new(&["E", "f", "r"]);
        for k in 0..50 {
            let e = k as f64;
            let r = (-(e - 20.0).powi(2) / 50.0).exp();
            t.push(vec![e, r * (-0.1 * e).exp(), r]);
        }
        let FitReport::Fdt { fit } = fit_table(&t, FitModel::Fdt, &FitOptions::default(), 0.2, Some((2.0, 40.0))).unwrap()
        else {
            panic!("wrong report")
        };
        assert!((fit.beta - 0.1).abs() < 1e-10);
    }
}
