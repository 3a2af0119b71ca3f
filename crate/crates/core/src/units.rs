//! Unit-tagged quantities such as `"15 km"` or `"100 m3/s"`, normalized to SI.

use crate::error::{Error, Result};

/// Physical dimension expected for a configuration entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Area,
    Discharge,
    /// 1/s
    Frequency,
    /// 1/s²
    FrequencySquared,
    /// s/m^(1/3)
    Manning,
    /// m/m
    Slope,
}

impl Dimension {
    fn scale(self, unit: &str) -> Option<f64> {
        let unit = unit.replace('³', "3").replace('²', "2");
        let s = match (self, unit.as_str()) {
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "km") => 1e3,
            (Dimension::Length, "cm") => 1e-2,
            (Dimension::Length, "mm") => 1e-3,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "min") => 60.0,
            (Dimension::Time, "h") => 3600.0,
            (Dimension::Time, "d") => 86_400.0,
            (Dimension::Area, "m2") => 1.0,
            (Dimension::Area, "km2") => 1e6,
            (Dimension::Discharge, "m3/s") => 1.0,
            (Dimension::Frequency, "1/s") => 1.0,
            (Dimension::Frequency, "1/min") => 1.0 / 60.0,
            (Dimension::Frequency, "1/h") => 1.0 / 3600.0,
            (Dimension::FrequencySquared, "1/s2") => 1.0,
            (Dimension::Manning, "s/m^(1/3)") => 1.0,
            (Dimension::Slope, "m/m") => 1.0,
            (Dimension::Slope, "m/km") => 1e-3,
            _ => return None,
        };
        Some(s)
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Area => "area",
            Dimension::Discharge => "discharge",
            Dimension::Frequency => "frequency",
            Dimension::FrequencySquared => "squared frequency",
            Dimension::Manning => "Manning coefficient",
            Dimension::Slope => "slope",
        }
    }
}

/// Parses `"<number> <unit>"` and returns the value in SI units.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let (number, unit) = text
        .split_once(char::is_whitespace)
        .ok_or_else(|| Error::Config(format!("'{text}' has no unit; expected a {}", dim.name())))?;
    let value: f64 = number
        .parse()
        .map_err(|_| Error::Config(format!("'{number}' is not a number (in '{text}')")))?;
    if !value.is_finite() {
        return Err(Error::Config(format!("'{text}' is not finite")));
    }
    let scale = dim
        .scale(unit.trim())
        .ok_or_else(|| Error::Config(format!("unit '{}' is not a {} unit (in '{text}')", unit.trim(), dim.name())))?;
    Ok(value * scale)
}
