//! The complete two-loop level controller.
//!
//! Every sample:
//! 1. quantize both measured levels to the sensor resolution;
//! 2. feed forward the reconstructed near-actuator level `z_a*(Q_e)` through
//!    the online trajectory planner;
//! 3. correct it with the outer loop, `z* = z_a* − Δz(z_r − z_r*)`;
//! 4. run the inner intelligent PI on `z` (slope filter, `F̂`, command,
//!    saturation, anti-windup);
//! 5. update the outer integral with the inner saturation information.

use super::outer::{OuterGains, OuterLoop};
use super::reconstruction::ReconstructionLaw;
use super::trajectory::ReferenceTrajectory;
use crate::error::{Error, Result};
use crate::mfc::{ControllerGains, IntelligentPi, Limit, Saturator, UltraLocalModel};
use crate::plant::Levels;
use crate::signals::quantize_level;

/// Tuning of both loops.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSettings {
    /// Controller period `T_s`, s.
    pub period: f64,
    /// Ultra-local model scale, m².
    pub alpha: f64,
    /// Slope-filter window, samples.
    pub window: usize,
    pub gains: ControllerGains,
    pub saturator: Saturator,
    pub outer: OuterGains,
    /// Length of a planned transition of `z_a*`, s.
    pub trajectory_duration: f64,
    /// Change of `z_a*` target that triggers replanning, m.
    pub replan_threshold: f64,
    /// Conditional integration on both loops.
    pub anti_windup: bool,
    /// Add the discrete rate of the outer correction to the feedforward `ż*`.
    pub correction_rate_feedforward: bool,
}

impl CascadeSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) {
            return Err(Error::invalid(format!("controller period must be > 0, got {}", self.period)));
        }
        // Outer integral action slower than the inner proportional action.
        if !(self.outer.ki * self.period < self.gains.kp * self.period) {
            return Err(Error::invalid(format!(
                "outer loop must be slower than the inner loop (ki_out = {} 1/s, K_P = {} 1/s)",
                self.outer.ki, self.gains.kp
            )));
        }
        if self.trajectory_duration < 4.0 * self.period {
            return Err(Error::invalid("trajectory duration must cover at least four periods"));
        }
        UltraLocalModel::level(self.alpha, self.window)?;
        Ok(())
    }
}

/// Everything one controller sample produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeSample {
    pub t: f64,
    pub q_e: f64,
    pub z: f64,
    pub z_quant: f64,
    pub z_r: f64,
    pub z_r_quant: f64,
    pub z_r_star: f64,
    pub z_a_star: f64,
    pub z_star: f64,
    pub z_star_rate: f64,
    pub correction: f64,
    pub z_dot_hat: f64,
    pub f_hat: f64,
    pub u_raw: f64,
    pub u_applied: f64,
    pub saturated: bool,
    pub limit: Option<Limit>,
}

/// Operating point the controller starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeInit {
    pub t0: f64,
    pub levels: Levels,
    pub q_e: f64,
    pub z_r_star: f64,
    /// Command currently held by the actuator.
    pub command: f64,
}

#[derive(Debug, Clone)]
pub struct CascadeController {
    settings: CascadeSettings,
    law: ReconstructionLaw,
    reference: ReferenceTrajectory,
    outer: OuterLoop,
    inner: IntelligentPi,
    previous_correction: f64,
}

impl CascadeController {
    pub fn new(settings: CascadeSettings, law: ReconstructionLaw, init: CascadeInit) -> Result<Self> {
        settings.validate()?;
        let model = UltraLocalModel::level(settings.alpha, settings.window)?;
        let z0 = quantize_level(init.levels.z)?;
        let z_a0 = law.query(init.q_e, init.z_r_star)?;
        let reference = ReferenceTrajectory::new(
            init.t0,
            z_a0,
            settings.trajectory_duration,
            settings.period,
            settings.replan_threshold,
        )?;
        let mut outer = OuterLoop::new(settings.outer).with_anti_windup(settings.anti_windup);
        // Bumpless start: the corrected setpoint equals the measured level.
        outer.preset(z_a0 - z0);
        let inner = IntelligentPi::new(model, settings.gains, settings.saturator, settings.period, z0, init.command)?
            .with_anti_windup(settings.anti_windup);
        let previous_correction = outer.correct(0.0)?;
        Ok(Self { settings, law, reference, outer, inner, previous_correction })
    }

    pub fn settings(&self) -> &CascadeSettings {
        &self.settings
    }

    pub fn inner(&self) -> &IntelligentPi {
        &self.inner
    }

    pub fn outer(&self) -> &OuterLoop {
        &self.outer
    }

    pub fn reference(&self) -> &ReferenceTrajectory {
        &self.reference
    }

    /// One controller sample at time `t`; returns the command to hold until
    /// the next sample.
    pub fn step(&mut self, t: f64, levels: Levels, q_e: f64, z_r_star: f64) -> Result<CascadeSample> {
        let z_quant = quantize_level(levels.z)?;
        let z_r_quant = quantize_level(levels.z_r)?;

        let target = self.law.query(q_e, z_r_star)?;
        let planned = self.reference.update(t, target)?;

        let e_r = z_r_quant - z_r_star;
        let correction = self.outer.correct(e_r)?;
        let z_star = planned.value - correction;
        let mut z_star_rate = planned.rate;
        if self.settings.correction_rate_feedforward {
            z_star_rate -= (correction - self.previous_correction) / self.settings.period;
        }
        self.previous_correction = correction;

        let out = self.inner.step(z_quant, z_star, z_star_rate)?;
        self.outer.integrate(e_r, self.settings.period, out.limit);

        Ok(CascadeSample {
            t,
            q_e,
            z: levels.z,
            z_quant,
            z_r: levels.z_r,
            z_r_quant,
            z_r_star,
            z_a_star: planned.value,
            z_star,
            z_star_rate,
            correction,
            z_dot_hat: out.ydot_hat,
            f_hat: out.f_hat,
            u_raw: out.u_raw,
            u_applied: out.u_applied,
            saturated: out.saturated,
            limit: out.limit,
        })
    }
}
