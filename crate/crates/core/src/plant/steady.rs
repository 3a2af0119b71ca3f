//! Steady open-channel flow: normal and critical depth, gradually varied
//! backwater profiles, and PDE steady states held by a level servo.

use super::{read_levels, BoundaryFlows, ChannelGeometry, Plant, ReachState, SaintVenant, SaintVenantPlant, GRAVITY};
use crate::error::{Error, Result};

/// Manning discharge for uniform depth `h` on the channel's bed slope.
pub fn manning_discharge(geom: &ChannelGeometry, h: f64) -> f64 {
    let b = geom.width;
    let a = b * h;
    let r = a / (b + 2.0 * h);
    a * r.powf(2.0 / 3.0) * geom.bed_slope.sqrt() / geom.manning_n
}

/// Wide-channel approximation of the normal depth, `(n q / √S₀)^{3/5}`.
pub fn wide_channel_normal_depth(geom: &ChannelGeometry, q: f64) -> f64 {
    (geom.manning_n * q / (geom.width * geom.bed_slope.sqrt())).powf(0.6)
}

/// Normal depth with the exact hydraulic radius, by bisection.
pub fn normal_depth(geom: &ChannelGeometry, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::invalid(format!("normal depth needs q > 0, got {q}")));
    }
    if !(geom.bed_slope > 0.0) {
        return Err(Error::invalid("normal depth is undefined on a flat bed"));
    }
    let mut lo = 1e-6;
    let mut hi = 2.0 * wide_channel_normal_depth(geom, q) + 1.0;
    while manning_discharge(geom, hi) < q {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if manning_discharge(geom, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical depth `(q² / (g B²))^{1/3}`.
pub fn critical_depth(geom: &ChannelGeometry, q: f64) -> f64 {
    (q * q / (GRAVITY * geom.width * geom.width)).cbrt()
}

fn gvf_slope(geom: &ChannelGeometry, q: f64, h: f64) -> f64 {
    let b = geom.width;
    let a = b * h;
    let r = a / (b + 2.0 * h);
    let n = geom.manning_n;
    let sf = n * n * q * q / (a * a * r.powf(4.0 / 3.0));
    let froude2 = q * q / (GRAVITY * a * a * h);
    (geom.bed_slope - sf) / (1.0 - froude2)
}

/// Subcritical steady depth profile at the cell centres for discharge `q`,
/// integrated upstream (RK4) from depth `h_down` in the last cell.
pub fn backwater_profile(geom: &ChannelGeometry, q: f64, h_down: f64) -> Result<Vec<f64>> {
    let hc = critical_depth(geom, q);
    if !(h_down > hc) {
        return Err(Error::invalid(format!("downstream depth {h_down} m is not subcritical (critical {hc} m)")));
    }
    let n = geom.n_cells;
    let dx = geom.dx();
    let sub = 10;
    let step = -dx / sub as f64;
    let mut depths = vec![0.0; n];
    let mut h = h_down;
    depths[n - 1] = h;
    for i in (0..n - 1).rev() {
        for _ in 0..sub {
            let k1 = gvf_slope(geom, q, h);
            let k2 = gvf_slope(geom, q, h + 0.5 * step * k1);
            let k3 = gvf_slope(geom, q, h + 0.5 * step * k2);
            let k4 = gvf_slope(geom, q, h + step * k3);
            h += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !(h > hc) || !h.is_finite() {
                return Err(Error::invalid(format!("backwater profile for q = {q} reached critical depth")));
            }
        }
        depths[i] = h;
    }
    Ok(depths)
}

/// Downstream depth whose backwater profile passes through `z_r_target` at
/// the sensor, by bisection.
pub fn downstream_depth_for_target(geom: &ChannelGeometry, q: f64, z_r_target: f64) -> Result<f64> {
    let at_sensor = |h: f64| backwater_profile(geom, q, h).map(|d| geom.interpolate(&d, geom.sensor_x));
    let mut lo = 1.01 * critical_depth(geom, q);
    let mut hi = z_r_target + geom.bed_slope * geom.length + 1.0;
    // Profiles that hit critical depth lie below any admissible solution.
    while at_sensor(lo).is_err() {
        lo = 0.5 * (lo + hi);
        if hi - lo < 1e-9 {
            return Err(Error::Calibration(format!("no subcritical profile for q = {q}")));
        }
    }
    if at_sensor(lo)? > z_r_target {
        return Err(Error::Calibration(format!("target {z_r_target} m is below the lowest subcritical profile at q = {q}")));
    }
    while at_sensor(hi)? < z_r_target {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at_sensor(mid)? < z_r_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Iteration limits for [`pde_steady_state`].
#[derive(Debug, Clone, Copy)]
pub struct SteadyOptions {
    /// Servo time constant: `q_out = q + (B L / τ)(z_r − target)`.
    pub servo_time_constant: f64,
    /// Simulated time between convergence checks.
    pub check_interval: f64,
    /// Maximum simulated time.
    pub budget: f64,
    /// Largest relative area change over one check interval.
    pub area_tolerance: f64,
    /// Largest `|z_r − target|` accepted.
    pub level_tolerance: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            servo_time_constant: 7200.0,
            check_interval: 3600.0,
            budget: 30.0 * 86_400.0,
            area_tolerance: 1e-9,
            level_tolerance: 1e-6,
        }
    }
}

/// PDE steady state carrying discharge `q` with the sensor level held at
/// `z_r_target` by a proportional outflow servo.
///
/// Starts from the gradually varied profile and runs the solver until the
/// state stops changing. At steady state the servo outflow equals `q`, so
/// the sensor sits exactly on the target.
pub fn pde_steady_state(solver: &SaintVenant, q: f64, z_r_target: f64, opts: &SteadyOptions) -> Result<ReachState> {
    let geom = solver.geometry().clone();
    let h_down = downstream_depth_for_target(&geom, q, z_r_target)?;
    let depths = backwater_profile(&geom, q, h_down)?;
    let state = ReachState::from_depths(&geom, &depths, q)?;
    let mut plant = SaintVenantPlant::new(solver.clone(), state)?;
    let gain = geom.surface_area() / opts.servo_time_constant;
    let mut elapsed = 0.0;
    let mut previous = plant.state().area.clone();
    // Servo updates per check interval.
    let updates = 60;
    let chunk = opts.check_interval / updates as f64;
    while elapsed < opts.budget {
        for _ in 0..updates {
            let q_out = q + gain * (plant.levels().z_r - z_r_target);
            plant.advance(chunk, &mut |_| BoundaryFlows { q_in: q, q_lat: 0.0, q_out })?;
        }
        elapsed += opts.check_interval;
        let area = &plant.state().area;
        let change = area
            .iter()
            .zip(&previous)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        previous.clone_from(area);
        if change < opts.area_tolerance && (plant.levels().z_r - z_r_target).abs() < opts.level_tolerance {
            let mut state = plant.state().clone();
            state.t = 0.0;
            return Ok(state);
        }
    }
    Err(Error::Calibration(format!(
        "no steady state for q = {q} m3/s within {} days (z_r = {:.6} m, target {z_r_target} m)",
        opts.budget / 86_400.0,
        read_levels(&geom, plant.state()).z_r
    )))
}
