//! Fits a [`SurrogateReach`] to open-loop step responses of the Saint-Venant
//! plant.

use super::steady::{pde_steady_state, SteadyOptions};
use super::{BoundaryFlows, Plant, ReachState, SaintVenant, SaintVenantPlant, SurrogateReach};
use crate::error::{Error, Result};

/// Length of each step test.
const STEP_TEST: f64 = 6.0 * 3600.0;
/// Tail of the step test used for the ramp fit.
const FIT_TAIL: f64 = 2.0 * 3600.0;
const SAMPLE: f64 = 60.0;

/// Late-time ramp of `z_r` after a flow step: slope and the time at which the
/// fitted line leaves the initial level.
fn ramp_fit(solver: &SaintVenant, start: &ReachState, q: f64, dq: f64, lateral: bool) -> Result<(f64, f64)> {
    let mut plant = SaintVenantPlant::new(solver.clone(), start.clone())?;
    let z0 = plant.levels().z_r;
    let flows = BoundaryFlows {
        q_in: if lateral { q } else { q + dq },
        q_lat: if lateral { dq } else { 0.0 },
        q_out: q,
    };
    let mut samples = Vec::new();
    let n = (STEP_TEST / SAMPLE) as usize;
    for k in 1..=n {
        plant.advance(SAMPLE, &mut |_| flows)?;
        let t = k as f64 * SAMPLE;
        if t > STEP_TEST - FIT_TAIL {
            samples.push((t, plant.levels().z_r));
        }
    }
    let m = samples.len() as f64;
    let (st, sz) = samples.iter().fold((0.0, 0.0), |(a, b), (t, z)| (a + t, b + z));
    let (mt, mz) = (st / m, sz / m);
    let (sxy, sxx) = samples
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, z)| (a + (t - mt) * (z - mz), b + (t - mt).powi(2)));
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return Err(Error::Calibration("step response does not ramp up".into()));
    }
    let delay = (mt - (mz - z0) / slope).max(0.0);
    Ok((slope, delay))
}

/// Identifies the surrogate around discharge `q` with `z_r` at `z_r_target`,
/// using steps of `dq` on the upstream and lateral inflows.
pub fn identify_surrogate(solver: &SaintVenant, q: f64, z_r_target: f64, dq: f64) -> Result<SurrogateReach> {
    if !(dq > 0.0) {
        return Err(Error::invalid(format!("step size must be > 0, got {dq}")));
    }
    let opts = SteadyOptions::default();
    let geom = solver.geometry();
    let base = pde_steady_state(solver, q, z_r_target, &opts)?;
    let shifted = pde_steady_state(solver, q + dq, z_r_target, &opts)?;
    let z_a0 = super::read_levels(geom, &base).z;
    let z_a1 = super::read_levels(geom, &shifted).z;

    let (slope_in, delay_in) = ramp_fit(solver, &base, q, dq, false)?;
    let (_, delay_w) = ramp_fit(solver, &base, q, dq, true)?;
    let z_discharge_gain = (z_a1 - z_a0) / dq;
    let reach = SurrogateReach {
        surface_area: dq / slope_in,
        delay_in,
        delay_w,
        z_offset: z_a0 - z_r_target - z_discharge_gain * q,
        z_level_gain: 1.0,
        z_discharge_gain,
    };
    reach.validate()?;
    Ok(reach)
}
