use std::path::PathBuf;
use std::process::ExitCode;

use bathgen::runner::{
    fit_table, load_config, parse_pair, read_table, FitModel, Pipeline, RunConfig, Stage, MANIFEST_FILE,
};
use bathgen::thermofit::DEFAULT_TAIL_FRACTION;
use bathgen::{Error, Result};
use clap::{Parser, Subcommand};

/// Exact dynamics, entanglement and thermometry of few-mode Bose-Hubbard systems.
///
/// The thread count comes from BATHGEN_THREADS (default: all cores).
#[derive(Parser)]
#[command(name = "bathgen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Every stage in order, then the manifest.
    Run { config: PathBuf },
    /// Diagonalize the sector and prepare the initial state.
    BuildSpectrum { config: PathBuf },
    /// Propagate the initial state over the time grid.
    Evolve { config: PathBuf },
    /// Two-time correlators and their spectra.
    Greens {
        config: PathBuf,
        /// Replace the configured pairs by one 1-based pair `i,j`.
        #[arg(long, value_parser = pair_arg)]
        pair: Option<(usize, usize)>,
        /// Replace the configured center-of-motion times by one time.
        #[arg(long)]
        time: Option<f64>,
    },
    /// Temperatures from persisted spectra.
    Thermometry { config: PathBuf },
    /// Adjacent-gap ratio of the sector spectrum.
    Chaos { config: PathBuf },
    /// With `--model`, fit a CSV table; without it, run the fit stage of a config.
    Fit {
        input: PathBuf,
        #[arg(long, value_parser = model_arg)]
        model: Option<FitModel>,
        /// Energy window `lo,hi` for bose and fdt fits.
        #[arg(long, value_parser = window_arg)]
        window: Option<(f64, f64)>,
        #[arg(long, default_value_t = DEFAULT_TAIL_FRACTION)]
        tail_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn pair_arg(s: &str) -> std::result::Result<(usize, usize), String> {
    parse_pair(s).map_err(|e| e.to_string())
}

fn model_arg(s: &str) -> std::result::Result<FitModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn window_arg(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(format!("empty window [{lo}, {hi}]"))
    }
}

fn configure_threads() -> Result<()> {
    let threads = match std::env::var("BATHGEN_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidConfig(format!("BATHGEN_THREADS must be a positive integer, got {v:?}")))?,
        Err(_) => std::thread::available_parallelism().map_or(1, usize::from),
    };
    let par = if threads == 1 { faer::Par::Seq } else { faer::Par::rayon(threads) };
    faer::set_global_parallelism(par);
    log::debug!("using {threads} thread(s)");
    Ok(())
}

fn stages(config: RunConfig, list: &[Stage]) -> Result<()> {
    let mut pipeline = Pipeline::new(config)?;
    let manifest = pipeline.run_stages(list)?;
    println!("{}", pipeline.root().join(MANIFEST_FILE).display());
    for stage in &manifest.stages {
        println!("{:<16} {:>10.3} s", stage.name, stage.wall_seconds);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Run { config } => stages(load_config(&config)?, &Stage::ALL),
        Command::BuildSpectrum { config } => stages(load_config(&config)?, &[Stage::BuildSpectrum]),
        Command::Evolve { config } => stages(load_config(&config)?, &[Stage::Evolve]),
        Command::Thermometry { config } => stages(load_config(&config)?, &[Stage::Thermometry]),
        Command::Greens { config, pair, time } => {
            let mut cfg = load_config(&config)?;
            if let Some(p) = pair {
                cfg.measurement.pairs = vec![p];
                cfg.measurement.density_pairs = vec![p];
            }
            if let Some(t) = time {
                cfg.measurement.correlator_times = vec![t];
            }
            cfg.validate()?;
            stages(cfg, &[Stage::Greens])
        }
        Command::Chaos { config } => {
            let cfg = load_config(&config)?;
            let root = cfg.output_dir.clone();
            stages(cfg, &[Stage::Chaos])?;
            print!("{}", std::fs::read_to_string(root.join(bathgen::runner::CHAOS_REPORT))?);
            Ok(())
        }
        Command::Fit { input, model: None, .. } => stages(load_config(&input)?, &[Stage::Fit]),
        Command::Fit { input, model: Some(model), window, tail_fraction, seed, out } => {
            let table = read_table(&input)?;
            let opts = bathgen::thermofit::FitOptions { seed, ..Default::default() };
            let report = fit_table(&table, model, &opts, tail_fraction, window)?;
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            if let Some(path) = out {
                std::fs::write(path, &text)?;
            }
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
