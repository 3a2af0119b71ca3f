//! Ground-truth reach dynamics.
//!
//! The controller never sees these models directly: it only receives the two
//! quantized levels and the upstream discharge. [`SaintVenant`] is the
//! distributed reference plant; [`SurrogatePlant`] is an integrator-with-delay
//! stand-in for fast deterministic tests.

mod identify;
mod saint_venant;
pub mod steady;
mod surrogate;

pub use identify::identify_surrogate;
pub use saint_venant::{SaintVenant, SaintVenantPlant, GRAVITY};
pub use surrogate::{SurrogatePlant, SurrogateReach};

use crate::error::{Error, Result};

/// Prismatic rectangular channel. The upstream inflow enters at `x = 0`, the
/// actuator (turbine discharge) is at `x = length`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGeometry {
    pub length: f64,
    pub width: f64,
    pub bed_slope: f64,
    pub manning_n: f64,
    pub n_cells: usize,
    /// Abscissa where the lateral inflow `W` is injected.
    pub lateral_inflow_x: f64,
    /// Abscissa of the regulated level `z_r`.
    pub sensor_x: f64,
}

impl Default for ChannelGeometry {
    fn default() -> Self {
        Self {
            length: 15_000.0,
            width: 110.0,
            bed_slope: 1e-4,
            manning_n: 0.033,
            n_cells: 150,
            lateral_inflow_x: 5_000.0,
            sensor_x: 7_500.0,
        }
    }
}

impl ChannelGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("length", self.length)?;
        positive("width", self.width)?;
        positive("manning_n", self.manning_n)?;
        if !(self.bed_slope >= 0.0 && self.bed_slope.is_finite()) {
            return Err(Error::invalid(format!("bed slope must be >= 0, got {}", self.bed_slope)));
        }
        if self.n_cells < 10 {
            return Err(Error::invalid(format!("need at least 10 cells, got {}", self.n_cells)));
        }
        for (name, x) in [("sensor_x", self.sensor_x), ("lateral_inflow_x", self.lateral_inflow_x)] {
            if !(0.0..=self.length).contains(&x) {
                return Err(Error::invalid(format!("{name} = {x} m lies outside [0, {}]", self.length)));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    /// Bed elevation above the downstream end of the reach.
    pub fn bed_elevation(&self, x: f64) -> f64 {
        self.bed_slope * (self.length - x)
    }

    /// Water surface area of the reach.
    pub fn surface_area(&self) -> f64 {
        self.length * self.width
    }

    /// Index of the cell containing `x`.
    pub fn cell_of(&self, x: f64) -> usize {
        ((x / self.dx()).floor() as usize).min(self.n_cells - 1)
    }

    /// Linear interpolation of a per-cell quantity at abscissa `x`, constant
    /// beyond the first and last cell centres.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let pos = x / self.dx() - 0.5;
        if pos <= 0.0 {
            return values[0];
        }
        let last = values.len() - 1;
        if pos >= last as f64 {
            return values[last];
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        values[i] + frac * (values[i + 1] - values[i])
    }
}

/// Distributed state of the reach: wetted area and discharge per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachState {
    pub t: f64,
    pub area: Vec<f64>,
    pub discharge: Vec<f64>,
}

impl ReachState {
    /// Uniform depth `h` and discharge `q` everywhere.
    pub fn uniform(geom: &ChannelGeometry, h: f64, q: f64) -> Self {
        Self {
            t: 0.0,
            area: vec![h * geom.width; geom.n_cells],
            discharge: vec![q; geom.n_cells],
        }
    }

    /// Builds a state from per-cell depths.
    pub fn from_depths(geom: &ChannelGeometry, depths: &[f64], q: f64) -> Result<Self> {
        if depths.len() != geom.n_cells {
            return Err(Error::invalid(format!("expected {} depths, got {}", geom.n_cells, depths.len())));
        }
        if let Some(h) = depths.iter().find(|h| !(**h > 0.0)) {
            return Err(Error::invalid(format!("depths must be > 0, got {h}")));
        }
        Ok(Self {
            t: 0.0,
            area: depths.iter().map(|h| h * geom.width).collect(),
            discharge: vec![q; geom.n_cells],
        })
    }

    pub fn depths(&self, geom: &ChannelGeometry) -> Vec<f64> {
        self.area.iter().map(|a| a / geom.width).collect()
    }

    /// Stored volume `Σ A_i Δx`.
    pub fn volume(&self, geom: &ChannelGeometry) -> f64 {
        self.area.iter().sum::<f64>() * geom.dx()
    }
}

/// The two levels of the block diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Levels {
    /// Depth in the cell next to the actuator.
    pub z: f64,
    /// Depth at the regulated point.
    pub z_r: f64,
}

/// Reads `z` (actuator-adjacent cell) and `z_r` (interpolated at `sensor_x`).
pub fn read_levels(geom: &ChannelGeometry, state: &ReachState) -> Levels {
    let depths = state.depths(geom);
    Levels {
        z: depths[depths.len() - 1],
        z_r: geom.interpolate(&depths, geom.sensor_x),
    }
}

/// Flows acting on the reach at a given instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryFlows {
    pub q_in: f64,
    pub q_lat: f64,
    pub q_out: f64,
}

/// Running integrals of the boundary flows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowLedger {
    pub inflow: f64,
    pub lateral: f64,
    pub outflow: f64,
    pub abs_inflow: f64,
}

impl FlowLedger {
    fn record(&mut self, f: &BoundaryFlows, dt: f64) {
        self.inflow += f.q_in * dt;
        self.lateral += f.q_lat * dt;
        self.outflow += f.q_out * dt;
        self.abs_inflow += f.q_in.abs() * dt;
    }

    /// Net volume that entered the reach.
    pub fn net(&self) -> f64 {
        self.inflow + self.lateral - self.outflow
    }
}

/// A reach simulator driven with piecewise-constant boundary flows.
pub trait Plant {
    fn time(&self) -> f64;

    fn levels(&self) -> Levels;

    /// Advances by `duration` seconds; `flows(t)` is sampled at the start of
    /// every internal sub-step.
    fn advance(&mut self, duration: f64, flows: &mut dyn FnMut(f64) -> BoundaryFlows) -> Result<()>;

    /// Stored volume, when the model tracks one.
    fn volume(&self) -> Option<f64> {
        None
    }

    fn ledger(&self) -> FlowLedger;
}
