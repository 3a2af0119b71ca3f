//! Smooth reference transitions for the near-actuator level.
//!
//! A flat output admits any sufficiently smooth trajectory; transitions are
//! quintic polynomials that leave the current reference with matching value,
//! rate and acceleration and arrive at rest on the new target.

use crate::error::{Error, Result};

/// Value and first two derivatives of a reference at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RefPoint {
    pub value: f64,
    pub rate: f64,
    pub accel: f64,
}

/// Quintic transition starting at `t0`, constant after `t0 + duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticSegment {
    t0: f64,
    duration: f64,
    target: f64,
    coeffs: [f64; 6],
}

impl QuinticSegment {
    /// Constant reference.
    pub fn hold(t0: f64, value: f64) -> Self {
        Self { t0, duration: 0.0, target: value, coeffs: [value, 0.0, 0.0, 0.0, 0.0, 0.0] }
    }

    pub fn new(t0: f64, start: RefPoint, target: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid(format!("transition duration must be > 0, got {duration}")));
        }
        let RefPoint { value: z0, rate: v0, accel: a0 } = start;
        let t = duration;
        let dz = target - z0;
        let c3 = (20.0 * dz - 12.0 * v0 * t - 3.0 * a0 * t * t) / (2.0 * t.powi(3));
        let c4 = (-30.0 * dz + 16.0 * v0 * t + 3.0 * a0 * t * t) / (2.0 * t.powi(4));
        let c5 = (12.0 * dz - 6.0 * v0 * t - a0 * t * t) / (2.0 * t.powi(5));
        Ok(Self { t0, duration, target, coeffs: [z0, v0, 0.5 * a0, c3, c4, c5] })
    }

    pub fn start_time(&self) -> f64 {
        self.t0
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.duration
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn eval(&self, t: f64) -> RefPoint {
        if t >= self.end_time() {
            return RefPoint { value: self.target, rate: 0.0, accel: 0.0 };
        }
        let s = (t - self.t0).max(0.0);
        let c = &self.coeffs;
        let value = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
        let rate = c[1] + s * (2.0 * c[2] + s * (3.0 * c[3] + s * (4.0 * c[4] + s * 5.0 * c[5])));
        let accel = 2.0 * c[2] + s * (6.0 * c[3] + s * (12.0 * c[4] + s * 20.0 * c[5]));
        RefPoint { value, rate, accel }
    }
}

/// Plans a transition from `current` to `target`; `duration` must cover at
/// least four controller periods.
pub fn plan_trajectory(t0: f64, current: RefPoint, target: f64, duration: f64, period: f64) -> Result<QuinticSegment> {
    if duration < 4.0 * period {
        return Err(Error::invalid(format!(
            "transition of {duration} s is shorter than four periods ({} s)",
            4.0 * period
        )));
    }
    QuinticSegment::new(t0, current, target, duration)
}

/// A knot of the planned reference, recorded at every replanning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub value: f64,
    pub rate: f64,
}

/// Online replanner: keeps the current segment and starts a new one when
/// the requested target moves by more than `threshold`.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    segment: QuinticSegment,
    duration: f64,
    period: f64,
    threshold: f64,
    knots: Vec<Knot>,
}

impl ReferenceTrajectory {
    pub fn new(t0: f64, value: f64, duration: f64, period: f64, threshold: f64) -> Result<Self> {
        if duration < 4.0 * period {
            return Err(Error::invalid(format!("transition of {duration} s is shorter than four periods")));
        }
        if !(threshold >= 0.0) {
            return Err(Error::invalid("replanning threshold must be >= 0"));
        }
        Ok(Self {
            segment: QuinticSegment::hold(t0, value),
            duration,
            period,
            threshold,
            knots: vec![Knot { t: t0, value, rate: 0.0 }],
        })
    }

    /// Updates the target at time `t` and returns the reference there.
    pub fn update(&mut self, t: f64, target: f64) -> Result<RefPoint> {
        if (target - self.segment.target()).abs() > self.threshold {
            let here = self.segment.eval(t);
            self.segment = plan_trajectory(t, here, target, self.duration, self.period)?;
            self.knots.push(Knot { t, value: here.value, rate: here.rate });
        }
        Ok(self.segment.eval(t))
    }

    pub fn eval(&self, t: f64) -> RefPoint {
        self.segment.eval(t)
    }

    pub fn segment(&self) -> &QuinticSegment {
        &self.segment
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }
}
