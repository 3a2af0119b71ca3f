use thiserror::Error;

/// Errors produced by the control and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The requested plant step violates the CFL condition.
    #[error("time step {dt} s exceeds the CFL limit {limit} s")]
    StepSize { dt: f64, limit: f64 },

    /// A cell ran dry; the explicit scheme cannot continue.
    #[error("dry bed in cell {cell} at t = {t} s (wetted area {area} m2)")]
    DryBed { cell: usize, t: f64, area: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for plant failures (CFL or dry bed) as opposed to bad input.
    pub fn is_simulation_failure(&self) -> bool {
        matches!(self, Error::StepSize { .. } | Error::DryBed { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {value}")))
    }
}
