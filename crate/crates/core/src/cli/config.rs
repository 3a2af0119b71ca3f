//! Run configuration. Every physical quantity is written with its unit
//! (`length = "15 km"`) and normalized to SI on load.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cascade::{CascadeSettings, OuterGains};
use crate::error::{Error, Result};
use crate::mfc::{ControllerGains, Saturator};
use crate::plant::ChannelGeometry;
use crate::scenarios::{build_scenario, Scenario};
use crate::units::{parse_quantity, Dimension};

/// Configuration shipped with the crate; the defaults of every run.
pub const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantKind {
    Pde,
    Surrogate,
}

impl std::str::FromStr for PlantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pde" => Ok(PlantKind::Pde),
            "surrogate" => Ok(PlantKind::Surrogate),
            _ => Err(Error::Config(format!("plant must be 'pde' or 'surrogate', got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InnerGains {
    /// `K_P = 1 / (n T_s)`, `K_I = K_P² / 4`.
    Samples(f64),
    /// `K_P = 1 / t`, `K_I = K_P² / 4`, whatever the period.
    Time(f64),
    Explicit { kp: f64, ki: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub period: f64,
    pub alpha: f64,
    /// Length of the slope-estimation window, s. The sample count follows
    /// from the period.
    pub estimator_window: f64,
    pub gains: InnerGains,
    pub saturator: Saturator,
    pub anti_windup: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    pub kp_out: f64,
    /// `ki_out = kp_out / outer_integral_time`.
    pub outer_integral_time: f64,
    pub max_integral_correction: f64,
    pub trajectory_duration: f64,
    pub replan_threshold: f64,
    pub correction_rate_feedforward: bool,
    /// Precomputed `z_a` table; calibrated in-process when absent.
    pub reconstruction: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub q_grid: Vec<f64>,
    pub z_r_targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub number: u8,
    /// Custom scenario file replacing the shipped one.
    pub file: Option<PathBuf>,
    pub band_halfwidth: f64,
    pub bias_sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub plant: PlantKind,
    pub output: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: ChannelGeometry,
    pub controller: ControllerConfig,
    pub cascade: CascadeConfig,
    pub calibration: CalibrationConfig,
    pub scenario: ScenarioConfig,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_toml(DEFAULT_CONFIG, Path::new(".")).expect("shipped configuration is valid")
    }
}

impl RunConfig {
    /// Reads a configuration file; relative paths inside it are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| {
            Error::Config(format!("{e}(physical quantities are strings with a unit, e.g. \"15 km\")"))
        })?;
        let config = file.resolve(base)?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.geometry.validate().map_err(cfg)?;
        self.settings(self.controller.period).map_err(cfg)?.validate().map_err(cfg)?;
        if !(1..=3).contains(&self.scenario.number) && self.scenario.file.is_none() {
            return Err(Error::Config(format!("scenario must be 1, 2 or 3, got {}", self.scenario.number)));
        }
        if !(self.scenario.band_halfwidth > 0.0) {
            return Err(Error::Config("band halfwidth must be > 0".into()));
        }
        if self.scenario.bias_sign.abs() != 1.0 {
            return Err(Error::Config(format!("bias_sign must be 1 or -1, got {}", self.scenario.bias_sign)));
        }
        if self.calibration.z_r_targets.is_empty() {
            return Err(Error::Config("calibration needs at least one z_r target".into()));
        }
        Ok(())
    }

    /// Sample count of the slope-estimation window at `period`.
    pub fn window_samples(&self, period: f64) -> usize {
        (self.controller.estimator_window / period).round() as usize + 1
    }

    /// Controller settings for sampling period `period`.
    pub fn settings(&self, period: f64) -> Result<CascadeSettings> {
        let c = &self.controller;
        let gains = match c.gains {
            InnerGains::Samples(n) => ControllerGains::critically_damped(period, n)?,
            InnerGains::Time(t) => ControllerGains::new(1.0 / t, 0.25 / (t * t), 0.0)?,
            InnerGains::Explicit { kp, ki } => ControllerGains::new(kp, ki, 0.0)?,
        };
        let k = &self.cascade;
        Ok(CascadeSettings {
            period,
            alpha: c.alpha,
            window: self.window_samples(period),
            gains,
            saturator: c.saturator,
            outer: OuterGains::new(k.kp_out, k.kp_out / k.outer_integral_time, k.max_integral_correction)?,
            trajectory_duration: k.trajectory_duration,
            replan_threshold: k.replan_threshold,
            anti_windup: c.anti_windup,
            correction_rate_feedforward: k.correction_rate_feedforward,
        })
    }

    /// Selected scenario sampled at `period`.
    pub fn scenario(&self, period: f64) -> Result<Scenario> {
        match &self.scenario.file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                Scenario::from_toml(&text, period, self.run.seed)
            }
            None => build_scenario(self.scenario.number, period, self.run.seed),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    geometry: GeometryFile,
    controller: ControllerFile,
    cascade: CascadeFile,
    calibration: CalibrationFile,
    scenario: ScenarioFile,
    run: RunFile,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    length: String,
    width: String,
    bed_slope: String,
    manning_n: String,
    cells: usize,
    lateral_inflow_x: String,
    sensor_x: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerFile {
    period: String,
    alpha: String,
    estimator_window: String,
    gain_samples: Option<f64>,
    gain_time: Option<String>,
    kp: Option<String>,
    ki: Option<String>,
    u_min: String,
    u_max: String,
    rate_max: String,
    anti_windup: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CascadeFile {
    kp_out: f64,
    outer_integral_time: String,
    max_integral_correction: String,
    trajectory_duration: String,
    replan_threshold: String,
    correction_rate_feedforward: bool,
    reconstruction: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    q_min: String,
    q_max: String,
    q_step: String,
    z_r_targets: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    number: u8,
    file: Option<PathBuf>,
    band_halfwidth: String,
    bias_sign: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    plant: String,
    output: PathBuf,
    seed: u64,
}

impl ConfigFile {
    fn resolve(self, base: &Path) -> Result<RunConfig> {
        use Dimension::*;
        let g = &self.geometry;
        let geometry = ChannelGeometry {
            length: parse_quantity(&g.length, Length)?,
            width: parse_quantity(&g.width, Length)?,
            bed_slope: parse_quantity(&g.bed_slope, Slope)?,
            manning_n: parse_quantity(&g.manning_n, Manning)?,
            n_cells: g.cells,
            lateral_inflow_x: parse_quantity(&g.lateral_inflow_x, Length)?,
            sensor_x: parse_quantity(&g.sensor_x, Length)?,
        };

        let c = &self.controller;
        let gains = match (c.gain_samples, &c.gain_time, &c.kp, &c.ki) {
            (Some(n), None, None, None) if n > 0.0 => InnerGains::Samples(n),
            (None, Some(t), None, None) => match parse_quantity(t, Time)? {
                t if t > 0.0 => InnerGains::Time(t),
                _ => return Err(Error::Config("gain_time must be > 0".into())),
            },
            (None, None, Some(kp), Some(ki)) => InnerGains::Explicit {
                kp: parse_quantity(kp, Frequency)?,
                ki: parse_quantity(ki, FrequencySquared)?,
            },
            _ => {
                return Err(Error::Config(
                    "controller needs exactly one of gain_samples, gain_time or the kp/ki pair".into(),
                ))
            }
        };
        let saturator = Saturator::new(
            parse_quantity(&c.u_min, Discharge)?,
            parse_quantity(&c.u_max, Discharge)?,
            parse_quantity(&c.rate_max, Discharge)?,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let controller = ControllerConfig {
            period: parse_quantity(&c.period, Time)?,
            alpha: parse_quantity(&c.alpha, Area)?,
            estimator_window: parse_quantity(&c.estimator_window, Time)?,
            gains,
            saturator,
            anti_windup: c.anti_windup,
        };

        let k = &self.cascade;
        let cascade = CascadeConfig {
            kp_out: k.kp_out,
            outer_integral_time: parse_quantity(&k.outer_integral_time, Time)?,
            max_integral_correction: parse_quantity(&k.max_integral_correction, Length)?,
            trajectory_duration: parse_quantity(&k.trajectory_duration, Time)?,
            replan_threshold: parse_quantity(&k.replan_threshold, Length)?,
            correction_rate_feedforward: k.correction_rate_feedforward,
            reconstruction: k.reconstruction.as_ref().map(|p| base.join(p)),
        };
        if !(cascade.outer_integral_time > 0.0) {
            return Err(Error::Config("outer_integral_time must be > 0".into()));
        }

        let cal = &self.calibration;
        let (q_min, q_max, q_step) = (
            parse_quantity(&cal.q_min, Discharge)?,
            parse_quantity(&cal.q_max, Discharge)?,
            parse_quantity(&cal.q_step, Discharge)?,
        );
        if !(q_step > 0.0 && q_min > 0.0 && q_max >= q_min) {
            return Err(Error::Config("calibration grid needs 0 < q_min <= q_max and q_step > 0".into()));
        }
        let nodes = ((q_max - q_min) / q_step + 1e-9).floor() as usize + 1;
        let calibration = CalibrationConfig {
            q_grid: (0..nodes).map(|i| q_min + i as f64 * q_step).collect(),
            z_r_targets: cal
                .z_r_targets
                .iter()
                .map(|z| parse_quantity(z, Length))
                .collect::<Result<_>>()?,
        };

        let s = &self.scenario;
        let scenario = ScenarioConfig {
            number: s.number,
            file: s.file.as_ref().map(|p| base.join(p)),
            band_halfwidth: parse_quantity(&s.band_halfwidth, Length)?,
            bias_sign: s.bias_sign,
        };
        let run = RunSection {
            plant: self.run.plant.parse()?,
            output: self.run.output,
            seed: self.run.seed,
        };
        Ok(RunConfig { geometry, controller, cascade, calibration, scenario, run })
    }
}
