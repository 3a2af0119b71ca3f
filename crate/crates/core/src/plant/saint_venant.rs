//! Explicit finite-volume solver for the 1-D Saint-Venant equations in a
//! prismatic rectangular channel:
//!
//! ```text
//! ∂A/∂t + ∂Q/∂x = q_lat δ(x − x_lat)
//! ∂Q/∂t + ∂(Q²/A)/∂x + g A ∂η/∂x = −g A S_f,     S_f = n² Q|Q| / (A² R^{4/3})
//! ```
//!
//! with `η = h + z_b` the free-surface elevation, which folds the bed slope
//! into the pressure gradient. Fluxes are local Lax-Friedrichs (Rusanov);
//! the mass dissipation acts on `η` rather than on `A` so that water at rest
//! over a sloping bed stays exactly at rest. Both ends impose a discharge,
//! and the mass flux through them is exactly the imposed value.

use super::{BoundaryFlows, ChannelGeometry, FlowLedger, Levels, Plant, ReachState};
use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// Largest admissible Courant number.
const CFL: f64 = 0.9;

/// Solver bound to one channel geometry.
#[derive(Debug, Clone)]
pub struct SaintVenant {
    geom: ChannelGeometry,
    bed: Vec<f64>,
    lateral_cell: usize,
}

impl SaintVenant {
    pub fn new(geom: ChannelGeometry) -> Result<Self> {
        geom.validate()?;
        let bed = (0..geom.n_cells).map(|i| geom.bed_elevation(geom.cell_center(i))).collect();
        let lateral_cell = geom.cell_of(geom.lateral_inflow_x);
        Ok(Self { geom, bed, lateral_cell })
    }

    pub fn geometry(&self) -> &ChannelGeometry {
        &self.geom
    }

    fn wave_speed(&self, a: f64, q: f64) -> f64 {
        (q / a).abs() + (GRAVITY * a / self.geom.width).sqrt()
    }

    /// Largest time step allowed by the CFL condition for `state`.
    pub fn max_stable_dt(&self, state: &ReachState) -> f64 {
        let smax = state
            .area
            .iter()
            .zip(&state.discharge)
            .map(|(&a, &q)| self.wave_speed(a, q))
            .fold(0.0, f64::max);
        CFL * self.geom.dx() / smax
    }

    /// Friction slope `n² Q|Q| / (A² R^{4/3})`.
    pub fn friction_slope(&self, a: f64, q: f64) -> f64 {
        let b = self.geom.width;
        let r = a / (b + 2.0 * a / b);
        let n = self.geom.manning_n;
        n * n * q * q.abs() / (a * a * r.powf(4.0 / 3.0))
    }

    /// One explicit step of length `dt`.
    pub fn step(&self, state: &ReachState, flows: BoundaryFlows, dt: f64) -> Result<ReachState> {
        let limit = self.max_stable_dt(state);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::StepSize { dt, limit });
        }
        let g = &self.geom;
        let n = g.n_cells;
        let b = g.width;
        let dx = g.dx();
        let a = &state.area;
        let q = &state.discharge;

        let eta: Vec<f64> = a.iter().zip(&self.bed).map(|(ai, zb)| ai / b + zb).collect();
        let speed: Vec<f64> = a.iter().zip(q).map(|(&ai, &qi)| self.wave_speed(ai, qi)).collect();

        // Faces 0..=n; face j separates cells j-1 and j.
        let mut mass = vec![0.0; n + 1];
        let mut momentum = vec![0.0; n + 1];
        mass[0] = flows.q_in;
        momentum[0] = 0.5 * (flows.q_in * flows.q_in + q[0] * q[0]) / a[0] - 0.5 * speed[0] * (q[0] - flows.q_in);
        for j in 1..n {
            let (l, r) = (j - 1, j);
            let s = speed[l].max(speed[r]);
            mass[j] = 0.5 * (q[l] + q[r]) - 0.5 * s * b * (eta[r] - eta[l]);
            momentum[j] = 0.5 * (q[l] * q[l] / a[l] + q[r] * q[r] / a[r]) - 0.5 * s * (q[r] - q[l]);
        }
        let last = n - 1;
        mass[n] = flows.q_out;
        momentum[n] = 0.5 * (q[last] * q[last] + flows.q_out * flows.q_out) / a[last]
            - 0.5 * speed[last] * (flows.q_out - q[last]);

        let ratio = dt / dx;
        let mut area = Vec::with_capacity(n);
        let mut discharge = Vec::with_capacity(n);
        for i in 0..n {
            let mut ai = a[i] - ratio * (mass[i + 1] - mass[i]);
            if i == self.lateral_cell {
                ai += ratio * flows.q_lat;
            }
            // Surface gradient, one-sided at the two ends (linear ghost cells).
            let slope = match i {
                0 => (eta[1] - eta[0]) / dx,
                _ if i == last => (eta[last] - eta[last - 1]) / dx,
                _ => (eta[i + 1] - eta[i - 1]) / (2.0 * dx),
            };
            let qi = q[i]
                - ratio * (momentum[i + 1] - momentum[i])
                - dt * GRAVITY * a[i] * (slope + self.friction_slope(a[i], q[i]));
            if !(ai > 0.0) || !ai.is_finite() || !qi.is_finite() {
                return Err(Error::DryBed { cell: i, t: state.t + dt, area: ai });
            }
            area.push(ai);
            discharge.push(qi);
        }
        Ok(ReachState { t: state.t + dt, area, discharge })
    }
}

/// [`SaintVenant`] solver plus its state, as a [`Plant`].
#[derive(Debug, Clone)]
pub struct SaintVenantPlant {
    solver: SaintVenant,
    state: ReachState,
    ledger: FlowLedger,
}

impl SaintVenantPlant {
    pub fn new(solver: SaintVenant, state: ReachState) -> Result<Self> {
        if state.area.len() != solver.geometry().n_cells || state.discharge.len() != solver.geometry().n_cells {
            return Err(Error::invalid("state size does not match the grid"));
        }
        Ok(Self { solver, state, ledger: FlowLedger::default() })
    }

    pub fn state(&self) -> &ReachState {
        &self.state
    }

    pub fn solver(&self) -> &SaintVenant {
        &self.solver
    }
}

impl Plant for SaintVenantPlant {
    fn time(&self) -> f64 {
        self.state.t
    }

    fn levels(&self) -> Levels {
        super::read_levels(self.solver.geometry(), &self.state)
    }

    fn advance(&mut self, duration: f64, flows: &mut dyn FnMut(f64) -> BoundaryFlows) -> Result<()> {
        if !(duration > 0.0) {
            return Err(Error::invalid(format!("duration must be > 0, got {duration}")));
        }
        let t_end = self.state.t + duration;
        // Uniform sub-steps inside the period, re-sized from the current state.
        let limit = self.solver.max_stable_dt(&self.state);
        let steps = (duration / (0.95 * limit)).ceil().max(1.0) as usize;
        let dt = duration / steps as f64;
        for k in 0..steps {
            let f = flows(self.state.t);
            let mut next = self.solver.step(&self.state, f, dt)?;
            if k + 1 == steps {
                next.t = t_end;
            }
            self.ledger.record(&f, dt);
            self.state = next;
        }
        Ok(())
    }

    fn volume(&self) -> Option<f64> {
        Some(self.state.volume(self.solver.geometry()))
    }

    fn ledger(&self) -> FlowLedger {
        self.ledger
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still_water(geom: &ChannelGeometry, surface: f64) -> ReachState {
        let depths: Vec<f64> = (0..geom.n_cells).map(|i| surface - geom.bed_elevation(geom.cell_center(i))).collect();
        ReachState::from_depths(geom, &depths, 0.0).unwrap()
    }

    #[test]
    fn lake_at_rest_is_preserved() {
        let geom = ChannelGeometry::default();
        let sv = SaintVenant::new(geom.clone()).unwrap();
        let s0 = still_water(&geom, 6.0);
        let dt = sv.max_stable_dt(&s0);
        let mut s = s0.clone();
        for _ in 0..1000 {
            s = sv.step(&s, BoundaryFlows::default(), dt).unwrap();
        }
        for (a, a0) in s.area.iter().zip(&s0.area) {
            assert!((a - a0).abs() <= 1e-10 * a0);
        }
        assert!(s.discharge.iter().all(|q| q.abs() < 1e-9));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let geom = ChannelGeometry::default();
        let sv = SaintVenant::new(geom.clone()).unwrap();
        let s = ReachState::uniform(&geom, 5.0, 500.0);
        let dt = 2.0 * sv.max_stable_dt(&s);
        assert!(matches!(sv.step(&s, BoundaryFlows::default(), dt), Err(Error::StepSize { .. })));
    }

    #[test]
    fn draining_reports_dry_bed() {
        let geom = ChannelGeometry::default();
        let sv = SaintVenant::new(geom.clone()).unwrap();
        let s = ReachState::uniform(&geom, 0.05, 0.0);
        let dt = sv.max_stable_dt(&s);
        let flows = BoundaryFlows { q_in: 0.0, q_lat: 0.0, q_out: 1e4 };
        assert!(matches!(sv.step(&s, flows, dt), Err(Error::DryBed { .. })));
    }

    #[test]
    fn mass_balance_telescopes() {
        let geom = ChannelGeometry::default();
        let sv = SaintVenant::new(geom.clone()).unwrap();
        let mut s = ReachState::uniform(&geom, 6.0, 700.0);
        let flows = BoundaryFlows { q_in: 800.0, q_lat: 20.0, q_out: 700.0 };
        let dt = 0.5 * sv.max_stable_dt(&s);
        let v0 = s.volume(&geom);
        for _ in 0..100 {
            s = sv.step(&s, flows, dt).unwrap();
        }
        let dv = s.volume(&geom) - v0;
        let expected = 120.0 * 100.0 * dt;
        assert!((dv - expected).abs() <= 1e-6 * expected, "dv={dv} expected={expected}");
    }
}
