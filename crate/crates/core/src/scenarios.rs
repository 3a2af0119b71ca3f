//! Exogenous inputs of a closed-loop run and band-compliance metrics.
//!
//! A scenario bundles the upstream inflow `q_e(t)`, the remote setpoint
//! `z_r*(t)`, the flow-measurement bias riding on the realized outflow and a
//! seeded schedule of lock flushes entering as lateral inflow `w(t)`.
//! Profiles are continuous functions of time so the plant can evaluate them
//! between controller samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::signals::{TimeSeries, Unit};
use crate::units::{parse_quantity, Dimension};

const SCENARIO_FILES: [&str; 3] = [
    include_str!("../scenarios/scenario1.toml"),
    include_str!("../scenarios/scenario2.toml"),
    include_str!("../scenarios/scenario3.toml"),
];

/// Discharge error between the setpoint sent to the plant and the flow it
/// actually passes.
pub fn bias(q_e: f64) -> f64 {
    0.03 * q_e + 10.0
}

/// Rectangular discharge pulse active on `[start, start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockFlush {
    pub start: f64,
    pub amplitude: f64,
    pub duration: f64,
}

impl LockFlush {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }

    /// Number of sampling intervals `[kT, (k+1)T)` lying entirely inside the pulse.
    pub fn covered_samples(&self, period: f64) -> usize {
        let first = (self.start / period).ceil();
        let last = (self.end() / period).floor();
        if last > first {
            (last - first) as usize
        } else {
            0
        }
    }
}

/// Set of lock flushes. Overlapping pulses add up.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlushSchedule {
    flushes: Vec<LockFlush>,
}

impl FlushSchedule {
    pub fn new(mut flushes: Vec<LockFlush>) -> Result<Self> {
        for f in &flushes {
            if !(f.start.is_finite() && f.amplitude.is_finite() && f.duration > 0.0 && f.duration.is_finite()) {
                return Err(Error::invalid(format!("invalid lock flush {f:?}")));
            }
        }
        flushes.sort_by(|a, b| a.start.total_cmp(&b.start));
        Ok(Self { flushes })
    }

    /// Draws `count` flushes with start times uniform on a `grid` lattice
    /// inside `[0, horizon - duration]`.
    pub fn random(count: usize, amplitude: f64, duration: f64, grid: f64, horizon: f64, seed: u64) -> Result<Self> {
        if !(grid > 0.0) || !(duration > 0.0) {
            return Err(Error::invalid("flush grid and duration must be > 0"));
        }
        let slots = ((horizon - duration) / grid).floor();
        if count > 0 && slots < 0.0 {
            return Err(Error::invalid("flush duration exceeds the scenario horizon"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flushes = (0..count)
            .map(|_| LockFlush {
                start: rng.random_range(0..=slots as u64) as f64 * grid,
                amplitude,
                duration,
            })
            .collect();
        Self::new(flushes)
    }

    pub fn flushes(&self) -> &[LockFlush] {
        &self.flushes
    }

    pub fn signal(&self, t: f64) -> f64 {
        self.flushes.iter().filter(|f| f.is_active(t)).map(|f| f.amplitude).sum()
    }

    /// Exact integral of the signal over `[t0, t1]`.
    pub fn volume_between(&self, t0: f64, t1: f64) -> f64 {
        self.flushes
            .iter()
            .map(|f| f.amplitude * (f.end().min(t1) - f.start.max(t0)).max(0.0))
            .sum()
    }

    pub fn total_volume(&self) -> f64 {
        self.flushes.iter().map(|f| f.amplitude * f.duration).sum()
    }
}

/// Sum of active pulses at `t`.
pub fn lock_flush_signal(schedule: &FlushSchedule, t: f64) -> f64 {
    schedule.signal(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sine {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

/// Piecewise-linear profile held constant outside its knots, plus an
/// optional sinusoid.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    points: Vec<(f64, f64)>,
    sine: Option<Sine>,
}

impl Profile {
    pub fn new(points: Vec<(f64, f64)>, sine: Option<Sine>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("a profile needs at least one point"));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::invalid("profile points must be finite"));
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::invalid("profile times must be non-decreasing"));
        }
        if let Some(s) = sine {
            if !(s.period > 0.0) || !s.amplitude.is_finite() || !s.phase.is_finite() {
                return Err(Error::invalid("invalid sine component"));
            }
        }
        Ok(Self { points, sine })
    }

    pub fn constant(value: f64) -> Self {
        Self { points: vec![(0.0, value)], sine: None }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> f64 {
        let base = match self.points.iter().position(|&(tk, _)| tk > t) {
            Some(0) => self.points[0].1,
            None => self.points[self.points.len() - 1].1,
            Some(i) => {
                let (ta, va) = self.points[i - 1];
                let (tb, vb) = self.points[i];
                va + (vb - va) * (t - ta) / (tb - ta)
            }
        };
        match self.sine {
            Some(s) => base + s.amplitude * (std::f64::consts::TAU * (t - s.phase) / s.period).sin(),
            None => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Where the profile shape comes from.
    pub source: String,
    pub version: u32,
    pub duration: f64,
    pub period: f64,
    pub inflow: Profile,
    pub setpoint: Profile,
    pub bias_enabled: bool,
    pub flushes: FlushSchedule,
    pub seed: u64,
}

impl Scenario {
    pub fn q_e(&self, t: f64) -> f64 {
        self.inflow.eval(t)
    }

    pub fn z_r_star(&self, t: f64) -> f64 {
        self.setpoint.eval(t)
    }

    pub fn w(&self, t: f64) -> f64 {
        self.flushes.signal(t)
    }

    /// Outflow shortfall at `t`, zero when the bias is disabled.
    pub fn bias_at(&self, t: f64) -> f64 {
        if self.bias_enabled {
            bias(self.q_e(t))
        } else {
            0.0
        }
    }

    /// Number of controller steps in the run.
    pub fn steps(&self) -> usize {
        (self.duration / self.period).round() as usize
    }

    fn series(&self, unit: Unit, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries::from_fn(0.0, self.period, self.steps() + 1, unit, f).expect("validated period")
    }

    pub fn q_e_series(&self) -> TimeSeries {
        self.series(Unit::CubicMeterPerSecond, |t| self.q_e(t))
    }

    pub fn setpoint_series(&self) -> TimeSeries {
        self.series(Unit::Meter, |t| self.z_r_star(t))
    }

    pub fn w_series(&self) -> TimeSeries {
        self.series(Unit::CubicMeterPerSecond, |t| self.w(t))
    }

    /// Parses a scenario file; quantities carry unit suffixes.
    pub fn from_toml(text: &str, period: f64, seed: u64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid(format!("controller period must be > 0, got {period}")));
        }
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let duration = parse_quantity(&file.duration, Dimension::Time)?;
        if !(duration > 0.0) {
            return Err(Error::Config("scenario duration must be > 0".into()));
        }
        let inflow = file.inflow.build(Dimension::Discharge)?;
        let setpoint = file.setpoint.build(Dimension::Length)?;
        let flushes = match file.flushes {
            Some(f) => FlushSchedule::random(
                f.count,
                parse_quantity(&f.amplitude, Dimension::Discharge)?,
                parse_quantity(&f.duration, Dimension::Time)?,
                parse_quantity(&f.grid, Dimension::Time)?,
                duration,
                seed,
            )?,
            None => FlushSchedule::default(),
        };
        Ok(Self {
            name: file.name,
            source: file.source,
            version: file.version,
            duration,
            period,
            inflow,
            setpoint,
            bias_enabled: file.bias,
            flushes,
            seed,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    source: String,
    version: u32,
    duration: String,
    bias: bool,
    setpoint: ProfileFile,
    inflow: ProfileFile,
    flushes: Option<FlushFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    points: Vec<PointFile>,
    sine: Option<SineFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointFile {
    t: String,
    value: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SineFile {
    amplitude: String,
    period: String,
    phase: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlushFile {
    count: usize,
    amplitude: String,
    duration: String,
    grid: String,
}

impl ProfileFile {
    fn build(&self, dim: Dimension) -> Result<Profile> {
        let points = self
            .points
            .iter()
            .map(|p| Ok((parse_quantity(&p.t, Dimension::Time)?, parse_quantity(&p.value, dim)?)))
            .collect::<Result<Vec<_>>>()?;
        let sine = match &self.sine {
            Some(s) => Some(Sine {
                amplitude: parse_quantity(&s.amplitude, dim)?,
                period: parse_quantity(&s.period, Dimension::Time)?,
                phase: parse_quantity(&s.phase, Dimension::Time)?,
            }),
            None => None,
        };
        Profile::new(points, sine).map_err(|e| Error::Config(e.to_string()))
    }
}

/// One of the three shipped scenarios (`n` in 1..=3).
pub fn build_scenario(n: u8, period: f64, seed: u64) -> Result<Scenario> {
    let text = match n {
        1..=3 => SCENARIO_FILES[n as usize - 1],
        _ => return Err(Error::invalid(format!("scenario must be 1, 2 or 3, got {n}"))),
    };
    Scenario::from_toml(text, period, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    /// Largest `z_r - z_r*`, zero if never above.
    pub max_over: f64,
    /// Largest `z_r* - z_r`, zero if never below.
    pub max_under: f64,
    pub violation_time: f64,
    pub within_band: bool,
    pub band_halfwidth: f64,
    pub measured_transport_delay: Option<f64>,
}

impl BandReport {
    pub fn max_excursion(&self) -> f64 {
        self.max_over.max(self.max_under)
    }
}

/// Compares a remote level trace with its setpoint. A sample violates the
/// band when `|z_r - z_r*| >= halfwidth`; each violating sample counts for
/// one sampling period.
pub fn evaluate_band(z_r: &TimeSeries, z_r_star: &TimeSeries, halfwidth: f64) -> Result<BandReport> {
    if !z_r.aligned_with(z_r_star) {
        return Err(Error::invalid("level and setpoint traces are not aligned"));
    }
    if !(halfwidth > 0.0) {
        return Err(Error::invalid(format!("band halfwidth must be > 0, got {halfwidth}")));
    }
    let mut max_over: f64 = 0.0;
    let mut max_under: f64 = 0.0;
    let mut violations = 0usize;
    for (&z, &s) in z_r.values().iter().zip(z_r_star.values()) {
        let d = z - s;
        if !d.is_finite() {
            return Err(Error::invalid("non-finite level in trace"));
        }
        max_over = max_over.max(d);
        max_under = max_under.max(-d);
        if d.abs() >= halfwidth {
            violations += 1;
        }
    }
    let violation_time = violations as f64 * z_r.dt();
    Ok(BandReport {
        max_over,
        max_under,
        violation_time,
        within_band: violations == 0,
        band_halfwidth: halfwidth,
        measured_transport_delay: None,
    })
}

/// Lag between the first large inflow change and the remote level response,
/// taken as the lag that maximizes the cross-correlation of the sample
/// increments of both traces. The analysis window starts one hour before the
/// change and the lag is searched up to `max_lag`.
pub fn transport_delay(q_e: &TimeSeries, z_r: &TimeSeries, max_lag: f64) -> Result<Option<f64>> {
    if !q_e.aligned_with(z_r) {
        return Err(Error::invalid("inflow and level traces are not aligned"));
    }
    let dt = q_e.dt();
    let dq: Vec<f64> = q_e.values().windows(2).map(|w| w[1] - w[0]).collect();
    let dz: Vec<f64> = z_r.values().windows(2).map(|w| w[1] - w[0]).collect();
    let peak = dq.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    if peak == 0.0 {
        return Ok(None);
    }
    let onset = dq.iter().position(|d| d.abs() >= 0.5 * peak).unwrap_or(0);
    let lags = (max_lag / dt).round() as usize;
    let start = onset.saturating_sub((3600.0 / dt).round() as usize);
    // Only the first change: stop the input window where its increments end.
    let mut end = onset;
    while end < dq.len() && dq[end].abs() >= 0.5 * peak * 1e-3 && dq[end].signum() == dq[onset].signum() {
        end += 1;
    }
    let sign = dq[onset].signum();
    let mut best: Option<(usize, f64)> = None;
    for lag in 0..=lags {
        if end + lag > dz.len() {
            break;
        }
        let c: f64 = (start..end).map(|k| sign * dq[k] * dz[k + lag]).sum();
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((lag, c));
        }
    }
    Ok(best.filter(|&(_, c)| c > 0.0).map(|(lag, _)| lag as f64 * dt))
}
