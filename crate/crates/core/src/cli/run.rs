//! Closed-loop experiment: one scenario, one plant, one cascade controller.

use crate::cascade::{CascadeController, CascadeInit, CascadeSettings, ReconstructionLaw};
use crate::error::{Error, Result};
use crate::plant::steady::{pde_steady_state, SteadyOptions};
use crate::plant::{BoundaryFlows, Plant, SaintVenant, SaintVenantPlant};
use crate::scenarios::{evaluate_band, transport_delay, BandReport, Scenario};
use crate::signals::{TimeSeries, Unit};

/// Longest lag searched when measuring the inflow-to-level delay.
const MAX_DELAY_LAG: f64 = 3.0 * 3600.0;

/// One controller sample as exported to `traces.csv`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub q_e: f64,
    pub w: f64,
    pub bias: f64,
    pub u_raw: f64,
    pub u_applied: f64,
    pub saturated: bool,
    #[serde(rename = "F_hat")]
    pub f_hat: f64,
    pub z: f64,
    pub z_quant: f64,
    pub z_star: f64,
    pub z_r: f64,
    pub z_r_quant: f64,
    pub z_r_star: f64,
}

/// Volume bookkeeping of a run on a plant that tracks its storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBalance {
    pub initial_volume: f64,
    pub final_volume: f64,
    /// `∫ (q_in + q_lat - q_out) dt`
    pub net_inflow: f64,
    pub abs_inflow: f64,
}

impl MassBalance {
    pub fn defect(&self) -> f64 {
        (self.final_volume - self.initial_volume) - self.net_inflow
    }

    /// Defect relative to the initial volume.
    pub fn relative_to_volume(&self) -> f64 {
        self.defect().abs() / self.initial_volume
    }

    /// Defect relative to the total upstream inflow volume.
    pub fn relative_to_inflow(&self) -> f64 {
        self.defect().abs() / self.abs_inflow
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Vec<TraceRow>,
    pub report: BandReport,
    pub mass: Option<MassBalance>,
}

impl RunResult {
    pub fn series(&self, unit: Unit, f: impl Fn(&TraceRow) -> f64) -> Result<TimeSeries> {
        trace_series(&self.trace, unit, f)
    }
}

/// Column of a trace as a time series; rows are assumed evenly spaced.
pub fn trace_series(trace: &[TraceRow], unit: Unit, f: impl Fn(&TraceRow) -> f64) -> Result<TimeSeries> {
    let first = trace.first().ok_or_else(|| Error::invalid("empty trace"))?;
    let dt = trace.get(1).map_or(1.0, |r| r.t_s - first.t_s);
    TimeSeries::new(first.t_s, dt, unit, trace.iter().map(f).collect())
}

/// Exogenous inputs and controller configuration of a run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: Scenario,
    pub settings: CascadeSettings,
    pub law: ReconstructionLaw,
    /// Multiplies the bias: `q_out = u - sign * bias`.
    pub bias_sign: f64,
    pub band_halfwidth: f64,
}

impl Experiment {
    fn bias(&self, t: f64) -> f64 {
        self.bias_sign * self.scenario.bias_at(t)
    }

    /// Command that passes the initial inflow through the reach.
    pub fn initial_command(&self) -> f64 {
        self.scenario.q_e(0.0) + self.bias(0.0)
    }

    /// Saint-Venant plant at rest with the initial inflow and setpoint.
    pub fn initial_pde_plant(&self, solver: &SaintVenant) -> Result<SaintVenantPlant> {
        let state = pde_steady_state(
            solver,
            self.scenario.q_e(0.0),
            self.scenario.z_r_star(0.0),
            &SteadyOptions::default(),
        )?;
        SaintVenantPlant::new(solver.clone(), state)
    }

    /// Runs the scenario on `plant`, which must be at time 0.
    pub fn run(&self, plant: &mut dyn Plant) -> Result<RunResult> {
        if plant.time() != 0.0 {
            return Err(Error::InvalidState(format!("plant starts at t = {} s, expected 0", plant.time())));
        }
        let sc = &self.scenario;
        let period = self.settings.period;
        if (sc.period - period).abs() > 1e-9 {
            return Err(Error::invalid("scenario and controller periods differ"));
        }
        let initial_volume = plant.volume();
        let ledger0 = plant.ledger();
        let mut controller = CascadeController::new(
            self.settings.clone(),
            self.law.clone(),
            CascadeInit {
                t0: 0.0,
                levels: plant.levels(),
                q_e: sc.q_e(0.0),
                z_r_star: sc.z_r_star(0.0),
                command: self.initial_command(),
            },
        )?;

        let steps = sc.steps();
        let mut trace = Vec::with_capacity(steps);
        for k in 0..steps {
            let t = k as f64 * period;
            let s = controller.step(t, plant.levels(), sc.q_e(t), sc.z_r_star(t))?;
            trace.push(TraceRow {
                t_s: t,
                q_e: s.q_e,
                w: sc.w(t),
                bias: self.bias(t),
                u_raw: s.u_raw,
                u_applied: s.u_applied,
                saturated: s.saturated,
                f_hat: s.f_hat,
                z: s.z,
                z_quant: s.z_quant,
                z_star: s.z_star,
                z_r: s.z_r,
                z_r_quant: s.z_r_quant,
                z_r_star: s.z_r_star,
            });
            let u = s.u_applied;
            plant.advance(period, &mut |t| BoundaryFlows {
                q_in: sc.q_e(t),
                q_lat: sc.w(t),
                q_out: u - self.bias(t),
            })?;
        }

        let z_r = trace_series(&trace, Unit::Meter, |r| r.z_r)?;
        let z_r_star = trace_series(&trace, Unit::Meter, |r| r.z_r_star)?;
        let q_e = trace_series(&trace, Unit::CubicMeterPerSecond, |r| r.q_e)?;
        let mut report = evaluate_band(&z_r, &z_r_star, self.band_halfwidth)?;
        report.measured_transport_delay = transport_delay(&q_e, &z_r, MAX_DELAY_LAG)?;

        let mass = match (initial_volume, plant.volume()) {
            (Some(v0), Some(v1)) => {
                let ledger = plant.ledger();
                Some(MassBalance {
                    initial_volume: v0,
                    final_volume: v1,
                    net_inflow: ledger.net() - ledger0.net(),
                    abs_inflow: ledger.abs_inflow - ledger0.abs_inflow,
                })
            }
            _ => None,
        };
        Ok(RunResult { trace, report, mass })
    }
}
