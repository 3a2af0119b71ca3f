//! Model-free control: ultra-local model, intelligent PI/PID laws,
//! actuator saturation and conditional-integration anti-windup.
//!
//! The ultra-local model replaces the unknown plant by `y^(ν) = F + β u`,
//! valid over a short time span, where `F` lumps everything that is not
//! modelled and is re-estimated at every sample. For the level loop the
//! first-order form is written with the discharge sign made explicit:
//!
//! ```text
//! α ẏ = F − u        (β = −1/α)
//! ```
//!
//! so that `F` reads directly as the inflow feeding the reach and `u` as the
//! discharge leaving it. The loop is closed with
//!
//! ```text
//! u = F̂ − α ẏ* + α (K_P e + K_I ∫e),    e = y − y*
//! ```
//!
//! which, for an exact `F̂`, leaves the pure first-order integrator
//! `ė + K_P e + K_I ∫e = 0`.

use std::collections::VecDeque;

use crate::error::{ensure_finite, Error, Result};
use crate::signals::SlopeFilter;

/// Derivation order of the ultra-local model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

/// Parameters of `y^(ν) = F + β u`.
///
/// The level loop is built with [`UltraLocalModel::level`], which stores
/// `β = −1/α` so that `α ẏ = F − u` with `α > 0` a surface area in m².
#[derive(Debug, Clone, PartialEq)]
pub struct UltraLocalModel {
    order: Order,
    beta: f64,
    window: usize,
}

impl UltraLocalModel {
    /// First-order level model `α ẏ = F − u`.
    pub fn level(alpha: f64, window: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be > 0, got {alpha}")));
        }
        Self::check_window(window)?;
        Ok(Self { order: Order::First, beta: -1.0 / alpha, window })
    }

    /// General model with an explicit input gain `β ≠ 0`.
    pub fn new(order: Order, beta: f64, window: usize) -> Result<Self> {
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::invalid(format!("beta must be finite and non-zero, got {beta}")));
        }
        Self::check_window(window)?;
        Ok(Self { order, beta, window })
    }

    fn check_window(window: usize) -> Result<()> {
        if window < 2 {
            return Err(Error::invalid(format!("estimator window needs M >= 2, got {window}")));
        }
        Ok(())
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `α = −1/β`; positive for the level form.
    pub fn alpha(&self) -> f64 {
        -1.0 / self.beta
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// `F̂ = α ẏ̂ + u_prev`. `u_prev` must be the applied discharge over the
    /// same span the slope was estimated on: the last held command for a
    /// two-sample window, the matching weighted mean for longer ones.
    pub fn estimate_f(&self, ydot_hat: f64, u_prev: f64) -> Result<f64> {
        ensure_finite("derivative estimate", ydot_hat)?;
        ensure_finite("previous command", u_prev)?;
        Ok(self.alpha() * ydot_hat + u_prev)
    }
}

/// Tuning gains of the intelligent controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl ControllerGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Result<Self> {
        if !(kp > 0.0 && kp.is_finite()) {
            return Err(Error::invalid(format!("kp must be > 0, got {kp}")));
        }
        if !(ki >= 0.0 && ki.is_finite()) || !(kd >= 0.0 && kd.is_finite()) {
            return Err(Error::invalid("ki and kd must be finite and >= 0"));
        }
        Ok(Self { kp, ki, kd })
    }

    /// Critically damped PI placing a double pole at `−1/(2τ)`, with
    /// `K_P = 1/τ` and `τ = samples · period`.
    pub fn critically_damped(period: f64, samples: f64) -> Result<Self> {
        let kp = 1.0 / (samples * period);
        Self::new(kp, kp * kp / 4.0, 0.0)
    }
}

/// Which actuator limit is holding the command back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    High,
    Low,
}

/// Position and rate limits of the discharge actuator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturator {
    pub u_min: f64,
    pub u_max: f64,
    /// Largest change between consecutive samples.
    pub rate_max: f64,
}

impl Saturator {
    pub fn new(u_min: f64, u_max: f64, rate_max: f64) -> Result<Self> {
        if !(u_min < u_max) || !u_min.is_finite() || !u_max.is_finite() {
            return Err(Error::invalid(format!("need u_min < u_max, got [{u_min}, {u_max}]")));
        }
        if !(rate_max > 0.0) {
            return Err(Error::invalid(format!("rate_max must be > 0, got {rate_max}")));
        }
        Ok(Self { u_min, u_max, rate_max })
    }

    /// Position clamp followed by rate clamp around the previous command.
    pub fn saturate(&self, u_raw: f64, u_prev: f64) -> (f64, bool) {
        let applied = u_raw
            .clamp(self.u_min, self.u_max)
            .clamp(u_prev - self.rate_max, u_prev + self.rate_max);
        (applied, applied != u_raw)
    }

    /// Direction in which the raw command was cut, if it was.
    pub fn active_limit(u_raw: f64, u_applied: f64) -> Option<Limit> {
        if u_raw > u_applied {
            Some(Limit::High)
        } else if u_raw < u_applied {
            Some(Limit::Low)
        } else {
            None
        }
    }
}

/// Mutable state of one intelligent loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// ∫e, in output units times seconds.
    pub integral: f64,
    /// Command applied (post saturation) over the last interval.
    pub last_command: f64,
    /// Last `M` measured outputs, oldest first.
    pub filter_buffer: VecDeque<f64>,
    /// Commands applied over the last `M − 1` intervals, oldest first.
    pub command_buffer: VecDeque<f64>,
    /// Set when the last update was frozen by anti-windup.
    pub aw_active: bool,
}

impl ControllerState {
    /// Quiescent state: buffer filled with `y0`, command `u0`.
    pub fn at_rest(y0: f64, u0: f64, window: usize) -> Self {
        Self {
            integral: 0.0,
            last_command: u0,
            filter_buffer: std::iter::repeat_n(y0, window).collect(),
            command_buffer: std::iter::repeat_n(u0, window.saturating_sub(1)).collect(),
            aw_active: false,
        }
    }

    /// Pushes a new measurement, dropping the oldest one.
    pub fn push_measurement(&mut self, y: f64) {
        if !self.filter_buffer.is_empty() {
            self.filter_buffer.pop_front();
        }
        self.filter_buffer.push_back(y);
    }

    /// Records the command that will be held over the next interval.
    pub fn push_command(&mut self, u: f64) {
        if !self.command_buffer.is_empty() {
            self.command_buffer.pop_front();
        }
        self.command_buffer.push_back(u);
        self.last_command = u;
    }

    /// Conditional integration: `∫e += e·dt` unless the actuator is saturated
    /// and the update would push the raw command further past the limit.
    pub fn update_integral(&mut self, e: f64, dt: f64, saturated: bool, direction_consistent: bool) {
        self.aw_active = saturated && direction_consistent;
        if !self.aw_active {
            self.integral += e * dt;
        }
    }
}

/// `u = F̂ − α ẏ* + α (K_P e + K_I ∫e)`.
pub fn ipi_command(
    model: &UltraLocalModel,
    gains: &ControllerGains,
    f_hat: f64,
    ystar_dot: f64,
    e: f64,
    state: &ControllerState,
) -> Result<f64> {
    ensure_finite("F estimate", f_hat)?;
    ensure_finite("reference derivative", ystar_dot)?;
    ensure_finite("tracking error", e)?;
    ensure_finite("integral", state.integral)?;
    let alpha = model.alpha();
    Ok(f_hat - alpha * ystar_dot + alpha * (gains.kp * e + gains.ki * state.integral))
}

/// Second-order intelligent PID,
/// `u = −F̂/β + ÿ*/β + K_P e + K_I ∫e + K_D ė`.
///
/// With `e = y − y*` the closed loop `ë = β (K_P e + K_I ∫e + K_D ė)` is
/// stable for positive gains when `β < 0`, which is the case of the level
/// convention `β = −1/α`.
pub fn ipid_command(
    model: &UltraLocalModel,
    gains: &ControllerGains,
    f_hat: f64,
    ystar_ddot: f64,
    e: f64,
    edot: f64,
    state: &ControllerState,
) -> Result<f64> {
    if model.order() != Order::Second {
        return Err(Error::InvalidState(format!(
            "i-PID needs a second-order model, got order {}",
            model.order().as_u8()
        )));
    }
    for (name, v) in [("F estimate", f_hat), ("reference acceleration", ystar_ddot), ("error", e), ("error rate", edot)] {
        ensure_finite(name, v)?;
    }
    let beta = model.beta();
    Ok(-f_hat / beta + ystar_ddot / beta + gains.kp * e + gains.ki * state.integral + gains.kd * edot)
}

/// Everything one i-PI sample produced, for tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpiOutput {
    pub ydot_hat: f64,
    pub f_hat: f64,
    pub error: f64,
    pub u_raw: f64,
    pub u_applied: f64,
    pub saturated: bool,
    pub limit: Option<Limit>,
}

/// First-order intelligent PI with its own estimator, saturation and
/// anti-windup, executed once per sampling period.
#[derive(Debug, Clone)]
pub struct IntelligentPi {
    model: UltraLocalModel,
    gains: ControllerGains,
    saturator: Saturator,
    filter: SlopeFilter,
    state: ControllerState,
    anti_windup: bool,
}

impl IntelligentPi {
    pub fn new(
        model: UltraLocalModel,
        gains: ControllerGains,
        saturator: Saturator,
        period: f64,
        initial_output: f64,
        initial_command: f64,
    ) -> Result<Self> {
        if model.order() != Order::First {
            return Err(Error::InvalidState("the i-PI runs on a first-order model".into()));
        }
        let filter = SlopeFilter::new(model.window(), period)?;
        let state = ControllerState::at_rest(initial_output, initial_command, model.window());
        Ok(Self { model, gains, saturator, filter, state, anti_windup: true })
    }

    /// Disables conditional integration (for demonstrating windup).
    pub fn with_anti_windup(mut self, enabled: bool) -> Self {
        self.anti_windup = enabled;
        self
    }

    pub fn model(&self) -> &UltraLocalModel {
        &self.model
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    pub fn saturator(&self) -> &Saturator {
        &self.saturator
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn period(&self) -> f64 {
        self.filter.dt()
    }

    /// Runs one sample: estimate `F`, compute, saturate and hold the command.
    ///
    /// `y` is the (quantized) measurement, `ystar`/`ystar_dot` the reference.
    pub fn step(&mut self, y: f64, ystar: f64, ystar_dot: f64) -> Result<IpiOutput> {
        ensure_finite("measurement", y)?;
        self.state.push_measurement(y);
        let window: Vec<f64> = self.state.filter_buffer.iter().copied().collect();
        let ydot_hat = self.filter.apply(&window)?;
        // Pairing a window-long slope with the last command alone leaves a
        // lagged loop on u that is unstable for M >= 5.
        let held: Vec<f64> = self.state.command_buffer.iter().copied().collect();
        let u_window = self.filter.interval_mean(&held)?;
        let f_hat = self.model.estimate_f(ydot_hat, u_window)?;
        self.step_with_f(f_hat, ydot_hat, y, ystar, ystar_dot)
    }

    /// Same as [`step`](Self::step) but with an externally supplied `F̂`.
    pub fn step_with_f(&mut self, f_hat: f64, ydot_hat: f64, y: f64, ystar: f64, ystar_dot: f64) -> Result<IpiOutput> {
        let error = y - ystar;
        let u_raw = ipi_command(&self.model, &self.gains, f_hat, ystar_dot, error, &self.state)?;
        let (u_applied, saturated) = self.saturator.saturate(u_raw, self.state.last_command);
        let limit = Saturator::active_limit(u_raw, u_applied);
        // A positive error raises the command, so integrating it deepens a
        // high saturation and relieves a low one.
        let consistent = match limit {
            Some(Limit::High) => error > 0.0,
            Some(Limit::Low) => error < 0.0,
            None => false,
        };
        self.state.update_integral(error, self.period(), saturated && self.anti_windup, consistent);
        self.state.push_command(u_applied);
        Ok(IpiOutput { ydot_hat, f_hat, error, u_raw, u_applied, saturated, limit })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn level_model() -> UltraLocalModel {
        UltraLocalModel::level(1.65e6, 10).unwrap()
    }

    #[test]
    fn model_invariants() {
        assert!(UltraLocalModel::level(0.0, 10).is_err());
        assert!(UltraLocalModel::level(-1.0, 10).is_err());
        assert!(UltraLocalModel::level(1.0, 1).is_err());
        assert!(UltraLocalModel::new(Order::Second, 0.0, 5).is_err());
        let m = level_model();
        assert_relative_eq!(m.beta(), -1.0 / 1.65e6);
        assert_relative_eq!(m.alpha(), 1.65e6, max_relative = 1e-15);
    }

    #[test]
    fn f_estimate_examples() {
        let m = level_model();
        assert_eq!(m.estimate_f(0.0, 5.0).unwrap(), 5.0);
        // α ẏ = F − u with F = 300, u = 200 gives ẏ = 100/α.
        let ydot = 100.0 / 1.65e6;
        assert_relative_eq!(m.estimate_f(ydot, 200.0).unwrap(), 300.0, max_relative = 1e-12);
        assert_relative_eq!(m.estimate_f(6.06e-5, 200.0).unwrap(), 299.99, max_relative = 1e-4);
        assert!(m.estimate_f(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn ipi_examples() {
        let m = level_model();
        let g = ControllerGains::critically_damped(120.0, 10.0).unwrap();
        let s = ControllerState::at_rest(5.0, 300.0, 10);
        assert_eq!(ipi_command(&m, &g, 300.0, 0.0, 0.0, &s).unwrap(), 300.0);
        assert_relative_eq!(ipi_command(&m, &g, 300.0, 1e-5, 0.0, &s).unwrap(), 283.5, max_relative = 1e-12);
        assert!(ipi_command(&m, &g, f64::INFINITY, 0.0, 0.0, &s).is_err());
    }

    #[test]
    fn ipid_examples() {
        let g = ControllerGains::new(2.0, 0.0, 0.0).unwrap();
        let unit = UltraLocalModel::new(Order::Second, 1.0, 5).unwrap();
        let s = ControllerState::at_rest(0.0, 0.0, 5);
        assert_eq!(ipid_command(&unit, &g, 0.0, 0.0, 1.0, 0.0, &s).unwrap(), 2.0);
        let m = UltraLocalModel::new(Order::Second, -0.5, 5).unwrap();
        assert_eq!(ipid_command(&m, &g, 3.0, 0.0, 0.0, 0.0, &s).unwrap(), 6.0);
        let first = level_model();
        assert!(matches!(
            ipid_command(&first, &g, 0.0, 0.0, 0.0, 0.0, &s),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn saturation_examples() {
        let s = Saturator::new(0.0, 1400.0, 50.0).unwrap();
        assert_eq!(s.saturate(120.0, 100.0), (120.0, false));
        assert_eq!(s.saturate(200.0, 100.0), (150.0, true));
        assert_eq!(s.saturate(-10.0, 100.0), (50.0, true));
        assert_eq!(s.saturate(1500.0, 1390.0), (1400.0, true));
        assert!(Saturator::new(10.0, 10.0, 1.0).is_err());
        assert!(Saturator::new(0.0, 10.0, 0.0).is_err());
        assert_eq!(Saturator::active_limit(200.0, 150.0), Some(Limit::High));
        assert_eq!(Saturator::active_limit(-10.0, 50.0), Some(Limit::Low));
        assert_eq!(Saturator::active_limit(5.0, 5.0), None);
    }

    #[test]
    fn conditional_integration() {
        let mut s = ControllerState::at_rest(0.0, 0.0, 3);
        s.update_integral(0.05, 120.0, false, false);
        assert_relative_eq!(s.integral, 6.0, max_relative = 1e-12);
        s.update_integral(0.05, 120.0, true, true);
        assert_relative_eq!(s.integral, 6.0, max_relative = 1e-12);
        assert!(s.aw_active);
        s.update_integral(-0.05, 120.0, true, false);
        assert!(s.integral.abs() < 1e-12);
        assert!(!s.aw_active);
    }

    #[test]
    fn buffer_keeps_window_length() {
        let mut s = ControllerState::at_rest(1.0, 0.0, 4);
        for k in 0..10 {
            s.push_measurement(k as f64);
        }
        assert_eq!(s.filter_buffer.iter().copied().collect::<Vec<_>>(), vec![6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn estimate_is_exact_on_an_integrator() {
        // α ẏ = F − u with arbitrary held commands: F̂ recovers F once the
        // window only contains samples produced by the plant.
        let alpha = 8e5;
        let (dt, m, f_true) = (120.0, 10, 812.0);
        let mut c = IntelligentPi::new(
            UltraLocalModel::level(alpha, m).unwrap(),
            ControllerGains::critically_damped(dt, 10.0).unwrap(),
            Saturator::new(0.0, 1400.0, 50.0).unwrap(),
            dt,
            5.0,
            700.0,
        )
        .unwrap();
        let mut y = 5.0;
        for k in 0..40 {
            let out = c.step(y, 5.0 + 0.01 * (k % 3) as f64, 0.0).unwrap();
            if k >= m {
                assert_relative_eq!(out.f_hat, f_true, max_relative = 1e-9);
            }
            y += dt * (f_true - out.u_applied) / alpha;
        }
    }

    #[test]
    fn quiescent_loop_holds_command() {
        let m = level_model();
        let g = ControllerGains::critically_damped(120.0, 10.0).unwrap();
        let sat = Saturator::new(0.0, 1400.0, 50.0).unwrap();
        let mut c = IntelligentPi::new(m, g, sat, 120.0, 6.0, 731.0).unwrap();
        for _ in 0..20 {
            let out = c.step(6.0, 6.0, 0.0).unwrap();
            assert_eq!(out.u_applied, 731.0);
            assert!(!out.saturated);
        }
    }
}
