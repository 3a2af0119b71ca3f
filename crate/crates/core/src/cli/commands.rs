//! `run`, `calibrate` and `sweep` subcommands.
//!
//! Exit codes: 0 success, 1 completed but the experiment failed its check,
//! 2 configuration or usage error, 3 simulation failure.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use super::config::{PlantKind, RunConfig};
use super::export::{plots, rows_csv, traces_csv, write_atomic, MetricsRow};
use super::run::{Experiment, RunResult};
use crate::cascade::{calibrate_reconstruction, ReconstructionLaw, ReconstructionRow};
use crate::error::{Error, Result};
use crate::plant::steady::SteadyOptions;
use crate::plant::{identify_surrogate, Plant, SaintVenant, SurrogatePlant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;

/// Discharge step used to identify the surrogate plant.
const SURROGATE_STEP: f64 = 50.0;
/// Smallest fraction of calibrated grid nodes accepted.
const MIN_COVERAGE: f64 = 0.8;

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub plant: Option<PlantKind>,
    pub scenario: Option<u8>,
}

/// Loads the configuration (the shipped default when `path` is `None`) and
/// applies the overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &overrides.out {
        config.run.output = out.clone();
    }
    if let Some(seed) = overrides.seed {
        config.run.seed = seed;
    }
    if let Some(plant) = overrides.plant {
        config.run.plant = plant;
    }
    if let Some(n) = overrides.scenario {
        if !(1..=3).contains(&n) {
            return Err(Error::Config(format!("scenario must be 1, 2 or 3, got {n}")));
        }
        config.scenario.number = n;
        config.scenario.file = None;
    }
    Ok(config)
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        e if e.is_simulation_failure() => EXIT_SIMULATION,
        _ => EXIT_FAILED,
    }
}

fn report_error(err: &Error) -> i32 {
    let code = exit_code(err);
    match code {
        EXIT_SIMULATION => eprintln!("simulation failure: {err}"),
        _ => eprintln!("error: {err}"),
    }
    code
}

fn plant_name(kind: PlantKind) -> &'static str {
    match kind {
        PlantKind::Pde => "pde",
        PlantKind::Surrogate => "surrogate",
    }
}

/// Calibrates the reconstruction table for every configured target.
pub fn calibrate(config: &RunConfig) -> Result<(ReconstructionLaw, f64, Vec<String>)> {
    let solver = SaintVenant::new(config.geometry.clone())?;
    let opts = SteadyOptions::default();
    let mut rows: Vec<ReconstructionRow> = Vec::new();
    let mut warnings = Vec::new();
    let (mut requested, mut calibrated) = (0, 0);
    for &target in &config.calibration.z_r_targets {
        let cal = calibrate_reconstruction(&solver, &config.calibration.q_grid, target, &opts)?;
        requested += cal.requested;
        calibrated += cal.requested - cal.dropped.len();
        rows.extend(cal.law.rows());
        warnings.extend(cal.warnings);
    }
    let law = ReconstructionLaw::new(rows)?;
    Ok((law, calibrated as f64 / requested as f64, warnings))
}

/// Reconstruction table named in the configuration, or a fresh calibration.
pub fn reconstruction_law(config: &RunConfig) -> Result<ReconstructionLaw> {
    match &config.cascade.reconstruction {
        Some(path) => ReconstructionLaw::load(path)
            .map_err(|e| Error::Config(format!("reconstruction table {}: {e}", path.display()))),
        None => {
            let (law, _, warnings) = calibrate(config)?;
            for w in warnings {
                warn!("{w}");
            }
            Ok(law)
        }
    }
}

/// Builds and runs the configured experiment at sampling period `period`.
pub fn execute(config: &RunConfig, law: &ReconstructionLaw, period: f64) -> Result<RunResult> {
    let experiment = Experiment {
        scenario: config.scenario(period)?,
        settings: config.settings(period)?,
        law: law.clone(),
        bias_sign: config.scenario.bias_sign,
        band_halfwidth: config.scenario.band_halfwidth,
    };
    let solver = SaintVenant::new(config.geometry.clone())?;
    let mut plant: Box<dyn Plant> = match config.run.plant {
        PlantKind::Pde => Box::new(experiment.initial_pde_plant(&solver)?),
        PlantKind::Surrogate => {
            let sc = &experiment.scenario;
            let (q0, z_r0) = (sc.q_e(0.0), sc.z_r_star(0.0));
            let reach = identify_surrogate(&solver, q0, z_r0, SURROGATE_STEP)?;
            let mut p = SurrogatePlant::new(reach, z_r0, q0)?;
            p.seed_history(q0, 0.0);
            Box::new(p)
        }
    };
    experiment.run(plant.as_mut())
}

fn write_run(dir: &Path, config: &RunConfig, period: f64, result: &RunResult) -> Result<MetricsRow> {
    fs::create_dir_all(dir)?;
    let scenario = config.scenario(period)?;
    let metrics = MetricsRow::new(&scenario.name, plant_name(config.run.plant), period, config.run.seed, result);
    write_atomic(&dir.join("traces.csv"), &traces_csv(&result.trace)?)?;
    write_atomic(&dir.join("metrics.csv"), &rows_csv(std::slice::from_ref(&metrics))?)?;
    for (name, svg) in plots(&result.trace, config.scenario.band_halfwidth) {
        write_atomic(&dir.join(name), svg.as_bytes())?;
    }
    Ok(metrics)
}

fn print_metrics(m: &MetricsRow) {
    println!(
        "{} | {} plant | T_s = {} s | max over {:.4} m, max under {:.4} m | violation {} s | within band: {}{}",
        m.scenario,
        m.plant,
        m.period_s,
        m.max_over,
        m.max_under,
        m.violation_time,
        m.within_band,
        m.measured_transport_delay
            .map(|d| format!(" | transport delay {:.0} min", d / 60.0))
            .unwrap_or_default()
    );
}

/// Runs one experiment; exit 0 iff the regulated level stayed in band.
pub fn cmd_run(config_path: Option<&Path>, overrides: &Overrides) -> i32 {
    let result = (|| -> Result<MetricsRow> {
        let config = load_config(config_path, overrides)?;
        let law = reconstruction_law(&config)?;
        let period = config.controller.period;
        let result = execute(&config, &law, period)?;
        if let Some(m) = result.mass {
            info!("mass balance defect {:.3e} of the initial volume", m.relative_to_volume());
        }
        write_run(&config.run.output, &config, period, &result)
    })();
    match result {
        Ok(m) => {
            print_metrics(&m);
            if m.within_band {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => report_error(&e),
    }
}

/// Writes `reconstruction.csv`; exit 0 if enough grid nodes calibrated.
pub fn cmd_calibrate(config_path: Option<&Path>, overrides: &Overrides) -> i32 {
    let result = (|| -> Result<f64> {
        let config = load_config(config_path, overrides)?;
        let (law, coverage, warnings) = calibrate(&config)?;
        for w in &warnings {
            warn!("{w}");
            eprintln!("warning: {w}");
        }
        fs::create_dir_all(&config.run.output)?;
        let mut bytes = Vec::new();
        law.write_csv(&mut bytes)?;
        let path = config.run.output.join("reconstruction.csv");
        write_atomic(&path, &bytes)?;
        println!("wrote {} rows to {} ({:.0}% of grid nodes)", law.rows().len(), path.display(), coverage * 100.0);
        Ok(coverage)
    })();
    match result {
        Ok(c) if c >= MIN_COVERAGE => EXIT_OK,
        Ok(_) => EXIT_FAILED,
        Err(e) => report_error(&e),
    }
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub period_s: f64,
    pub max_excursion: f64,
    pub max_over: f64,
    pub max_under: f64,
    pub within_band: bool,
}

/// Runs the experiment at each period (in parallel) and compares the largest
/// excursions. On scenarios 1 and 2 a shorter period must do strictly
/// better; exit 1 otherwise.
pub fn cmd_sweep(config_path: Option<&Path>, periods: &[f64], overrides: &Overrides) -> i32 {
    let result = (|| -> Result<(Vec<SweepRow>, bool)> {
        if periods.is_empty() {
            return Err(Error::Config("sweep needs at least one period".into()));
        }
        if let Some(p) = periods.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::Config(format!("periods must be > 0, got {p}")));
        }
        let config = load_config(config_path, overrides)?;
        for &p in periods {
            config.settings(p)?.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let law = reconstruction_law(&config)?;
        let rows = periods
            .par_iter()
            .map(|&period| {
                let result = execute(&config, &law, period)?;
                let dir = config.run.output.join(format!("period_{period}s"));
                let m = write_run(&dir, &config, period, &result)?;
                Ok(SweepRow {
                    period_s: period,
                    max_excursion: m.max_excursion(),
                    max_over: m.max_over,
                    max_under: m.max_under,
                    within_band: m.within_band,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write_atomic(&config.run.output.join("sweep.csv"), &rows_csv(&rows)?)?;
        let checked = config.scenario.file.is_none() && matches!(config.scenario.number, 1 | 2);
        Ok((rows, checked))
    })();
    let (rows, checked) = match result {
        Ok(r) => r,
        Err(e) => return report_error(&e),
    };
    println!("{:>10}  {:>14}  {:>11}", "period_s", "max |z_r-z_r*|", "within_band");
    for r in &rows {
        println!("{:>10}  {:>14.4}  {:>11}", r.period_s, r.max_excursion, r.within_band);
    }
    if checked && !improves_with_rate(&rows) {
        eprintln!("max excursion does not decrease strictly with the sampling period");
        return EXIT_FAILED;
    }
    EXIT_OK
}

/// True when sorting by decreasing period gives strictly decreasing excursions.
pub fn improves_with_rate(rows: &[SweepRow]) -> bool {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.period_s.total_cmp(&a.period_s));
    sorted.windows(2).all(|w| w[1].max_excursion < w[0].max_excursion)
}
