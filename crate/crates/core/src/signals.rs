//! Sampled signals, level-sensor quantization and algebraic slope estimation.
//!
//! The slope estimator eliminates the offset `a0` of a local affine model
//! `a0 + a1 t` and recovers `a1` from iterated integrals of the measured signal
//! over a sliding window `[now - T, now]`. Written as a filter, the estimate is
//!
//! ```text
//! a1 = 6 / T^3 * ∫_0^T (2τ - T) x(τ) dτ
//! ```
//!
//! with `τ` measured from the start of the window. The integral is discretized
//! with the trapezoidal rule and the weights are normalized so that the filter
//! is exact on affine signals for every window length.

use crate::error::{ensure_finite, Error, Result};

/// Physical unit carried by a [`TimeSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Meter,
    CubicMeterPerSecond,
    Dimensionless,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Meter => "m",
            Unit::CubicMeterPerSecond => "m3/s",
            Unit::Dimensionless => "-",
        }
    }
}

/// Uniformly sampled signal: sample `k` sits at `t0 + k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    unit: Unit,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, unit: Unit, values: Vec<f64>) -> Result<Self> {
        ensure_finite("t0", t0)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("sampling period must be > 0, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::invalid("a time series needs at least one sample"));
        }
        Ok(Self { t0, dt, unit, values })
    }

    /// Samples `f` on `n` points starting at `t0`.
    pub fn from_fn(t0: f64, dt: f64, n: usize, unit: Unit, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..n).map(|k| f(t0 + k as f64 * dt)).collect();
        Self::new(t0, dt, unit, values)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| self.time_at(k))
    }

    /// Time of the last sample.
    pub fn end_time(&self) -> f64 {
        self.time_at(self.values.len() - 1)
    }

    /// True when both series share the same time grid.
    pub fn aligned_with(&self, other: &TimeSeries) -> bool {
        self.len() == other.len()
            && (self.t0 - other.t0).abs() <= 1e-9 * self.dt
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
    }
}

/// Causal first-order derivative filter over the last `M` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFilter {
    dt: f64,
    weights: Vec<f64>,
    /// Weight of each of the `M − 1` sampling intervals, oldest first.
    interval_weights: Vec<f64>,
}

impl SlopeFilter {
    /// Builds the filter for a window of `window` samples spaced `dt` apart.
    pub fn new(window: usize, dt: f64) -> Result<Self> {
        if window < 2 {
            return Err(Error::invalid(format!("slope window needs M >= 2 samples, got {window}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("sampling period must be > 0, got {dt}")));
        }
        let span = (window - 1) as f64 * dt;
        let kernel = |tau: f64| 6.0 * (2.0 * tau - span) / span.powi(3);
        let mut weights: Vec<f64> = (0..window)
            .map(|k| {
                let quad = if k == 0 || k == window - 1 { 0.5 * dt } else { dt };
                quad * kernel(k as f64 * dt)
            })
            .collect();
        // Trapezoidal weights are exact on the kernel only as dt -> 0; rescale
        // so that sum(w_k * t_k) = 1 holds for every window length.
        let first_moment: f64 = weights.iter().enumerate().map(|(k, w)| w * k as f64 * dt).sum();
        for w in &mut weights {
            *w /= first_moment;
        }
        // The kernel is odd about the window centre; mirror it exactly.
        for k in 0..window / 2 {
            weights[k] = -weights[window - 1 - k];
        }
        if window % 2 == 1 {
            weights[window / 2] = 0.0;
        }
        // The estimate is a weighted mean of the increments: sample k enters
        // every interval before it, so interval i carries dt * sum_{k>i} w_k.
        let mut interval_weights = vec![0.0; window - 1];
        let mut tail = 0.0;
        for i in (0..window - 1).rev() {
            tail += weights[i + 1];
            interval_weights[i] = dt * tail;
        }
        Ok(Self { dt, weights, interval_weights })
    }

    pub fn window_len(&self) -> usize {
        self.weights.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interval_weights(&self) -> &[f64] {
        &self.interval_weights
    }

    /// Mean of a piecewise-constant input over the window, weighted the way
    /// the slope estimate weights the intervals. `held[i]` is the value held
    /// over interval `i`, oldest first.
    pub fn interval_mean(&self, held: &[f64]) -> Result<f64> {
        if held.len() != self.interval_weights.len() {
            return Err(Error::invalid(format!(
                "slope filter expects {} held values, got {}",
                self.interval_weights.len(),
                held.len()
            )));
        }
        Ok(held.iter().zip(&self.interval_weights).map(|(u, w)| u * w).sum())
    }

    /// Slope estimate from the last `M` samples, oldest first.
    pub fn apply(&self, window: &[f64]) -> Result<f64> {
        if window.len() != self.weights.len() {
            return Err(Error::invalid(format!(
                "slope filter expects {} samples, got {}",
                self.weights.len(),
                window.len()
            )));
        }
        // Pairwise differences make constant windows return exactly zero.
        let m = window.len();
        Ok((0..m / 2).map(|k| self.weights[m - 1 - k] * (window[m - 1 - k] - window[k])).sum())
    }

    /// Applies the filter to every full window of `series`; output sample `k`
    /// is the estimate at `series.time_at(k + M - 1)`.
    pub fn apply_series(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        if (series.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::invalid("series period differs from the filter period"));
        }
        series.values().windows(self.window_len()).map(|w| self.apply(w)).collect()
    }
}

/// Level sensor resolution.
pub const LEVEL_RESOLUTION: f64 = 0.01;

/// Rounds a level to the 1 cm sensor grid, ties to the even centimetre.
pub fn quantize_level(z: f64) -> Result<f64> {
    ensure_finite("level", z)?;
    let scaled = z / LEVEL_RESOLUTION;
    let floor = scaled.floor();
    // Decimal ties such as 1.235 m are not exact in binary; treat anything
    // within a few ulps of the half-way point as a tie.
    let tie = (scaled - floor - 0.5).abs() <= 1e-9 * scaled.abs().max(1.0);
    let steps = if tie {
        if floor.rem_euclid(2.0) == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    Ok(steps / 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Ordinary least-squares slope on equispaced samples.
    fn ls_slope(dt: f64, xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let tm = (n - 1.0) * dt / 2.0;
        let xm = xs.iter().sum::<f64>() / n;
        let (mut num, mut den) = (0.0, 0.0);
        for (k, x) in xs.iter().enumerate() {
            let t = k as f64 * dt - tm;
            num += t * (x - xm);
            den += t * t;
        }
        num / den
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(SlopeFilter::new(1, 1.0).is_err());
        assert!(SlopeFilter::new(5, 0.0).is_err());
        assert!(SlopeFilter::new(5, -1.0).is_err());
        let f = SlopeFilter::new(4, 1.0).unwrap();
        assert!(matches!(f.apply(&[1.0, 2.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn two_point_window_is_a_difference_quotient() {
        let f = SlopeFilter::new(2, 1.0).unwrap();
        assert_relative_eq!(f.weights()[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(f.weights()[1], 1.0, epsilon = 1e-15);
        let f = SlopeFilter::new(2, 2.0).unwrap();
        assert_relative_eq!(f.apply(&[3.0, 7.0]).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_are_balanced() {
        for m in [2, 3, 7, 10, 61, 200] {
            let f = SlopeFilter::new(m, 0.7).unwrap();
            let sum: f64 = f.weights().iter().sum();
            let moment: f64 = f.weights().iter().enumerate().map(|(k, w)| w * k as f64 * 0.7).sum();
            assert!(sum.abs() < 1e-12, "M={m} sum={sum}");
            assert_relative_eq!(moment, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn interval_weights_reproduce_the_slope() {
        for m in [2, 5, 10, 31] {
            let dt = 120.0;
            let f = SlopeFilter::new(m, dt).unwrap();
            assert_relative_eq!(f.interval_weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            // Integrate a piecewise-constant rate and compare.
            let rates: Vec<f64> = (0..m - 1).map(|i| ((i * 7) % 5) as f64 * 1e-4 - 2e-4).collect();
            let mut y = vec![3.0];
            for r in &rates {
                y.push(y.last().unwrap() + r * dt);
            }
            let slope = f.apply(&y).unwrap();
            assert_relative_eq!(slope, f.interval_mean(&rates).unwrap(), epsilon = 1e-15);
        }
        let two = SlopeFilter::new(2, 60.0).unwrap();
        assert_eq!(two.interval_weights(), &[1.0]);
        assert!(two.interval_mean(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn constant_window_has_zero_slope() {
        let f = SlopeFilter::new(9, 120.0).unwrap();
        assert!(f.apply(&[5.0; 9]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn quadratic_over_full_window_matches_least_squares() {
        let f = SlopeFilter::new(61, 1.0).unwrap();
        let xs: Vec<f64> = (0..61).map(|k| (k as f64).powi(2)).collect();
        let oracle = ls_slope(1.0, &xs);
        assert_relative_eq!(oracle, 60.0, epsilon = 1e-9);
        assert_relative_eq!(f.apply(&xs).unwrap(), oracle, epsilon = 1e-6);
    }

    #[test]
    fn affine_signal_slope_matches_least_squares() {
        for m in [2, 5, 33] {
            let f = SlopeFilter::new(m, 0.5).unwrap();
            let xs: Vec<f64> = (0..m).map(|k| 2.0 + 3.0 * (10.0 + k as f64 * 0.5)).collect();
            assert_relative_eq!(f.apply(&xs).unwrap(), 3.0, max_relative = 1e-9);
            assert_relative_eq!(ls_slope(0.5, &xs), 3.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn series_application_is_causal() {
        let s = TimeSeries::from_fn(0.0, 2.0, 10, Unit::Meter, |t| 1.0 + 0.25 * t).unwrap();
        let f = SlopeFilter::new(4, 2.0).unwrap();
        let d = f.apply_series(&s).unwrap();
        assert_eq!(d.len(), 7);
        for v in d {
            assert_relative_eq!(v, 0.25, max_relative = 1e-12);
        }
        let wrong = SlopeFilter::new(4, 1.0).unwrap();
        assert!(wrong.apply_series(&s).is_err());
    }

    #[test]
    fn time_series_invariants() {
        assert!(TimeSeries::new(0.0, 0.0, Unit::Meter, vec![1.0]).is_err());
        assert!(TimeSeries::new(0.0, 1.0, Unit::Meter, vec![]).is_err());
        let s = TimeSeries::new(10.0, 2.5, Unit::CubicMeterPerSecond, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.time_at(2), 15.0);
        assert_eq!(s.end_time(), 15.0);
        assert_eq!(s.unit().symbol(), "m3/s");
    }

    #[test]
    fn quantization_examples() {
        assert_eq!(quantize_level(1.234).unwrap(), 1.23);
        assert_eq!(quantize_level(1.235).unwrap(), 1.24);
        assert_eq!(quantize_level(1.225).unwrap(), 1.22);
        assert_eq!(quantize_level(1.2251).unwrap(), 1.23);
        assert_eq!(quantize_level(0.0).unwrap(), 0.0);
        assert_eq!(quantize_level(-0.015).unwrap(), -0.02);
        assert!(quantize_level(f64::NAN).is_err());
        assert!(quantize_level(f64::INFINITY).is_err());
    }
}
