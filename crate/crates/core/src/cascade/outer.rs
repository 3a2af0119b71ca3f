//! Outer loop: slow PI on the regulated-point error that shifts the inner
//! setpoint (online replanning of the near-actuator reference).

use crate::error::{ensure_finite, Error, Result};
use crate::mfc::Limit;

/// Outer PI gains and integral bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterGains {
    /// Level-to-level gain, m/m.
    pub kp: f64,
    /// 1/s.
    pub ki: f64,
    /// Bound on `|ki ∫e_r|`, m.
    pub max_integral_correction: f64,
}

impl OuterGains {
    pub fn new(kp: f64, ki: f64, max_integral_correction: f64) -> Result<Self> {
        if !(kp >= 0.0 && ki >= 0.0 && kp.is_finite() && ki.is_finite()) {
            return Err(Error::invalid("outer gains must be finite and >= 0"));
        }
        if !(max_integral_correction > 0.0) {
            return Err(Error::invalid("integral correction bound must be > 0"));
        }
        Ok(Self { kp, ki, max_integral_correction })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterLoop {
    gains: OuterGains,
    integral: f64,
    aw_active: bool,
    anti_windup: bool,
}

impl OuterLoop {
    pub fn new(gains: OuterGains) -> Self {
        Self { gains, integral: 0.0, aw_active: false, anti_windup: true }
    }

    pub fn with_anti_windup(mut self, enabled: bool) -> Self {
        self.anti_windup = enabled;
        self
    }

    pub fn gains(&self) -> &OuterGains {
        &self.gains
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn aw_active(&self) -> bool {
        self.aw_active
    }

    /// Presets the integral so that the correction equals `correction` for a
    /// zero error (bumpless start).
    pub fn preset(&mut self, correction: f64) {
        if self.gains.ki > 0.0 {
            let bound = self.gains.max_integral_correction;
            self.integral = correction.clamp(-bound, bound) / self.gains.ki;
        }
    }

    /// `Δz = kp e_r + ki ∫e_r` for `e_r = z_r − z_r*`.
    ///
    /// A positive `Δz` means the regulated point is high; the inner setpoint
    /// becomes `z* = z_a* − Δz`.
    pub fn correct(&self, e_r: f64) -> Result<f64> {
        ensure_finite("outer error", e_r)?;
        Ok(self.gains.kp * e_r + self.gains.ki * self.integral)
    }

    /// Conditional integration of `e_r` over `dt`. `inner_limit` is the
    /// actuator limit hit by the inner loop on this sample, if any.
    pub fn integrate(&mut self, e_r: f64, dt: f64, inner_limit: Option<Limit>) {
        // e_r > 0 lowers z*, which asks the inner loop for more discharge.
        let pushes_limit = match inner_limit {
            Some(Limit::High) => e_r > 0.0,
            Some(Limit::Low) => e_r < 0.0,
            None => false,
        };
        self.aw_active = self.anti_windup && pushes_limit;
        if self.aw_active {
            return;
        }
        let bound = self.gains.max_integral_correction;
        let next = self.integral + e_r * dt;
        if self.gains.ki > 0.0 && (self.gains.ki * next).abs() > bound {
            // Clamp, but never move the integral away from zero past the bound.
            self.integral = next.clamp(-bound / self.gains.ki, bound / self.gains.ki);
        } else {
            self.integral = next;
        }
    }
}
