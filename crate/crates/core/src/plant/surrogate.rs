//! Integrator-with-delay reduced model of the reach:
//!
//! ```text
//! S ż_r(t) = q_in(t − d_in) + w(t − d_w) − q_out(t)
//! z        = z0 + a z_r + b q_out
//! ```

use std::collections::VecDeque;

use super::{BoundaryFlows, FlowLedger, Levels, Plant};
use crate::error::{Error, Result};

/// Parameters of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateReach {
    /// Free-surface area `S`, m².
    pub surface_area: f64,
    /// Transport delay from the upstream inflow to `z_r`, s.
    pub delay_in: f64,
    /// Transport delay from the lateral inflow to `z_r`, s.
    pub delay_w: f64,
    /// Near-actuator level map `z = z0 + a z_r + b q_out`.
    pub z_offset: f64,
    pub z_level_gain: f64,
    pub z_discharge_gain: f64,
}

impl SurrogateReach {
    /// Pure integrator with `z = z_r` and no delay.
    pub fn integrator(surface_area: f64) -> Self {
        Self {
            surface_area,
            delay_in: 0.0,
            delay_w: 0.0,
            z_offset: 0.0,
            z_level_gain: 1.0,
            z_discharge_gain: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.surface_area > 0.0) {
            return Err(Error::invalid(format!("surface area must be > 0, got {}", self.surface_area)));
        }
        if !(self.delay_in >= 0.0 && self.delay_w >= 0.0) {
            return Err(Error::invalid("surrogate delays must be >= 0"));
        }
        Ok(())
    }

    pub fn near_actuator_level(&self, z_r: f64, q_out: f64) -> f64 {
        self.z_offset + self.z_level_gain * z_r + self.z_discharge_gain * q_out
    }

    /// Level `z_r` rate for the given (already delayed) flows.
    pub fn level_rate(&self, q_in: f64, w: f64, q_out: f64) -> f64 {
        (q_in + w - q_out) / self.surface_area
    }
}

/// Sample history for delayed look-ups (zero-order hold).
#[derive(Debug, Clone, Default)]
struct History {
    samples: VecDeque<(f64, f64)>,
}

impl History {
    fn push(&mut self, t: f64, v: f64) {
        self.samples.push_back((t, v));
    }

    fn at(&self, t: f64) -> Option<f64> {
        let idx = self.samples.partition_point(|(ts, _)| *ts <= t + 1e-9);
        if idx == 0 {
            None
        } else {
            Some(self.samples[idx - 1].1)
        }
    }

    /// Drops samples no longer reachable at times `>= t`.
    fn trim_before(&mut self, t: f64) {
        while self.samples.len() > 1 && self.samples[1].0 <= t {
            self.samples.pop_front();
        }
    }
}

/// Time-stepped [`SurrogateReach`].
#[derive(Debug, Clone)]
pub struct SurrogatePlant {
    reach: SurrogateReach,
    t: f64,
    z_r: f64,
    q_out: f64,
    q_in_history: History,
    w_history: History,
    ledger: FlowLedger,
    /// Internal Euler step.
    max_dt: f64,
}

impl SurrogatePlant {
    /// Starts at `z_r0` with empty histories; call [`seed_history`](Self::seed_history)
    /// before stepping when the delays are non-zero.
    pub fn new(reach: SurrogateReach, z_r0: f64, q_out0: f64) -> Result<Self> {
        reach.validate()?;
        Ok(Self {
            reach,
            t: 0.0,
            z_r: z_r0,
            q_out: q_out0,
            q_in_history: History::default(),
            w_history: History::default(),
            ledger: FlowLedger::default(),
            max_dt: 10.0,
        })
    }

    /// Pretends the inputs were constant since the beginning of time.
    pub fn seed_history(&mut self, q_in: f64, w: f64) {
        self.q_in_history.push(f64::NEG_INFINITY, q_in);
        self.w_history.push(f64::NEG_INFINITY, w);
    }

    pub fn reach(&self) -> &SurrogateReach {
        &self.reach
    }

    /// One explicit Euler step with the given current flows.
    pub fn step(&mut self, q_in: f64, w: f64, q_out: f64, dt: f64) -> Result<Levels> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
        }
        self.q_in_history.push(self.t, q_in);
        self.w_history.push(self.t, w);
        let q_in_d = self.q_in_history.at(self.t - self.reach.delay_in).ok_or_else(|| {
            Error::invalid(format!("no inflow history at t = {} s", self.t - self.reach.delay_in))
        })?;
        let w_d = self
            .w_history
            .at(self.t - self.reach.delay_w)
            .ok_or_else(|| Error::invalid(format!("no lateral history at t = {} s", self.t - self.reach.delay_w)))?;
        self.z_r += dt * self.reach.level_rate(q_in_d, w_d, q_out);
        self.q_out = q_out;
        self.ledger.record(&BoundaryFlows { q_in, q_lat: w, q_out }, dt);
        self.t += dt;
        self.q_in_history.trim_before(self.t - self.reach.delay_in);
        self.w_history.trim_before(self.t - self.reach.delay_w);
        Ok(self.levels())
    }
}

impl Plant for SurrogatePlant {
    fn time(&self) -> f64 {
        self.t
    }

    fn levels(&self) -> Levels {
        Levels {
            z: self.reach.near_actuator_level(self.z_r, self.q_out),
            z_r: self.z_r,
        }
    }

    fn advance(&mut self, duration: f64, flows: &mut dyn FnMut(f64) -> BoundaryFlows) -> Result<()> {
        if !(duration > 0.0) {
            return Err(Error::invalid(format!("duration must be > 0, got {duration}")));
        }
        let steps = (duration / self.max_dt).ceil().max(1.0) as usize;
        let dt = duration / steps as f64;
        let t_end = self.t + duration;
        for _ in 0..steps {
            let f = flows(self.t);
            self.step(f.q_in, f.q_lat, f.q_out, dt)?;
        }
        self.t = t_end;
        Ok(())
    }

    fn ledger(&self) -> FlowLedger {
        self.ledger
    }
}
