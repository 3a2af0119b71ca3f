//! Near-actuator target level reconstructed from the upstream discharge.
//!
//! The operator's empirical law `z_a = g(Q_e)` is replaced by a table
//! calibrated on the reference plant: for each discharge, the steady level
//! next to the actuator that puts the regulated point on its setpoint.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::steady::{pde_steady_state, SteadyOptions};
use crate::plant::{read_levels, SaintVenant};

/// One calibrated node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionRow {
    pub q: f64,
    pub z_r_target: f64,
    pub z_a: f64,
}

/// Direction of `z_a` as a function of discharge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
    NotMonotone,
}

#[derive(Debug, Clone, PartialEq)]
struct Curve {
    z_r_target: f64,
    q: Vec<f64>,
    z_a: Vec<f64>,
}

impl Curve {
    fn at(&self, q: f64) -> f64 {
        let n = self.q.len();
        if n == 1 || q <= self.q[0] {
            return self.z_a[0];
        }
        if q >= self.q[n - 1] {
            return self.z_a[n - 1];
        }
        let i = self.q.partition_point(|x| *x <= q) - 1;
        if self.q[i] == q {
            return self.z_a[i];
        }
        let frac = (q - self.q[i]) / (self.q[i + 1] - self.q[i]);
        self.z_a[i] + frac * (self.z_a[i + 1] - self.z_a[i])
    }
}

/// Piecewise-linear `z_a(Q, z_r*)`, one curve per calibrated setpoint.
///
/// Discharges outside the calibrated range are clamped to the end nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionLaw {
    curves: Vec<Curve>,
}

/// Setpoints closer than this share a curve.
const TARGET_TOL: f64 = 1e-6;

impl ReconstructionLaw {
    pub fn new(mut rows: Vec<ReconstructionRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("reconstruction table is empty"));
        }
        if rows.iter().any(|r| !(r.q.is_finite() && r.z_r_target.is_finite() && r.z_a.is_finite())) {
            return Err(Error::invalid("reconstruction table holds non-finite values"));
        }
        rows.sort_by(|a, b| a.z_r_target.total_cmp(&b.z_r_target));
        let mut curves: Vec<Curve> = Vec::new();
        for row in rows {
            match curves.last_mut() {
                Some(c) if (c.z_r_target - row.z_r_target).abs() <= TARGET_TOL => {
                    if row.q <= *c.q.last().unwrap() {
                        return Err(Error::invalid(format!(
                            "discharge grid must be strictly increasing (z_r* = {}, q = {})",
                            row.z_r_target, row.q
                        )));
                    }
                    c.q.push(row.q);
                    c.z_a.push(row.z_a);
                }
                _ => curves.push(Curve { z_r_target: row.z_r_target, q: vec![row.q], z_a: vec![row.z_a] }),
            }
        }
        Ok(Self { curves })
    }

    pub fn rows(&self) -> Vec<ReconstructionRow> {
        self.curves
            .iter()
            .flat_map(|c| {
                c.q.iter().zip(&c.z_a).map(move |(&q, &z_a)| ReconstructionRow { q, z_r_target: c.z_r_target, z_a })
            })
            .collect()
    }

    /// Calibrated setpoints, ascending.
    pub fn targets(&self) -> Vec<f64> {
        self.curves.iter().map(|c| c.z_r_target).collect()
    }

    /// `z_a` for discharge `q` and setpoint `z_r_target`; setpoints between
    /// calibrated curves are interpolated linearly.
    pub fn query(&self, q: f64, z_r_target: f64) -> Result<f64> {
        if !q.is_finite() || !z_r_target.is_finite() {
            return Err(Error::invalid("reconstruction query must be finite"));
        }
        let i = self.curves.partition_point(|c| c.z_r_target < z_r_target - TARGET_TOL);
        if let Some(c) = self.curves.get(i) {
            if (c.z_r_target - z_r_target).abs() <= TARGET_TOL {
                return Ok(c.at(q));
            }
            if i > 0 {
                let lo = &self.curves[i - 1];
                let frac = (z_r_target - lo.z_r_target) / (c.z_r_target - lo.z_r_target);
                return Ok(lo.at(q) + frac * (c.at(q) - lo.at(q)));
            }
        }
        Err(Error::invalid(format!(
            "setpoint {z_r_target} m is outside the calibrated range {:?}",
            self.targets()
        )))
    }

    /// Monotonicity of each curve in `q`.
    pub fn trends(&self) -> Vec<(f64, Trend)> {
        self.curves
            .iter()
            .map(|c| {
                let d: Vec<f64> = c.z_a.windows(2).map(|w| w[1] - w[0]).collect();
                let trend = if d.iter().all(|x| *x > 0.0) {
                    Trend::Increasing
                } else if d.iter().all(|x| *x < 0.0) {
                    Trend::Decreasing
                } else {
                    Trend::NotMonotone
                };
                (c.z_r_target, trend)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<std::result::Result<Vec<ReconstructionRow>, _>>()?;
        Self::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Outcome of [`calibrate_reconstruction`].
#[derive(Debug, Clone)]
pub struct Calibration {
    pub law: ReconstructionLaw,
    /// Nodes that did not reach a steady state, with the reason.
    pub dropped: Vec<(f64, String)>,
    pub warnings: Vec<String>,
    pub requested: usize,
}

impl Calibration {
    /// Fraction of requested nodes that made it into the table.
    pub fn coverage(&self) -> f64 {
        (self.requested - self.dropped.len()) as f64 / self.requested as f64
    }
}

/// Calibrates `z_a(q)` for one setpoint by running the plant to steady state
/// with a downstream level servo at every grid discharge.
pub fn calibrate_reconstruction(
    solver: &SaintVenant,
    q_grid: &[f64],
    z_r_target: f64,
    opts: &SteadyOptions,
) -> Result<Calibration> {
    if q_grid.is_empty() {
        return Err(Error::invalid("empty discharge grid"));
    }
    if q_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("discharge grid must be strictly increasing"));
    }
    let geom = solver.geometry();
    let results: Vec<(f64, Result<f64>)> = q_grid
        .par_iter()
        .map(|&q| (q, pde_steady_state(solver, q, z_r_target, opts).map(|s| read_levels(geom, &s).z)))
        .collect();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    for (q, r) in results {
        match r {
            Ok(z_a) => rows.push(ReconstructionRow { q, z_r_target, z_a }),
            Err(e) => {
                warnings.push(format!("node q = {q} m3/s dropped: {e}"));
                dropped.push((q, e.to_string()));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Calibration("no grid node reached a steady state".into()));
    }
    let law = ReconstructionLaw::new(rows)?;
    for (target, trend) in law.trends() {
        if trend == Trend::NotMonotone {
            warnings.push(format!("z_a is not monotone in q for z_r* = {target} m"));
        }
    }
    Ok(Calibration { law, dropped, warnings, requested: q_grid.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> ReconstructionLaw {
        ReconstructionLaw::new(vec![
            ReconstructionRow { q: 400.0, z_r_target: 8.0, z_a: 8.6 },
            ReconstructionRow { q: 600.0, z_r_target: 8.0, z_a: 8.4 },
            ReconstructionRow { q: 800.0, z_r_target: 8.0, z_a: 8.1 },
        ])
        .unwrap()
    }

    #[test]
    fn nodes_and_midpoints() {
        let l = law();
        assert_eq!(l.query(600.0, 8.0).unwrap(), 8.4);
        assert_eq!(l.query(400.0, 8.0).unwrap(), 8.6);
        assert!((l.query(700.0, 8.0).unwrap() - 8.25).abs() < 1e-12);
        assert_eq!(l.query(100.0, 8.0).unwrap(), 8.6);
        assert_eq!(l.query(2000.0, 8.0).unwrap(), 8.1);
        assert!(l.query(600.0, 7.0).is_err());
        assert_eq!(l.trends(), vec![(8.0, Trend::Decreasing)]);
    }

    #[test]
    fn rejects_unsorted_grid() {
        let rows = vec![
            ReconstructionRow { q: 400.0, z_r_target: 8.0, z_a: 8.6 },
            ReconstructionRow { q: 400.0, z_r_target: 8.0, z_a: 8.5 },
        ];
        assert!(ReconstructionLaw::new(rows).is_err());
        assert!(ReconstructionLaw::new(vec![]).is_err());
    }

    #[test]
    fn interpolates_between_setpoints() {
        let mut rows = law().rows();
        rows.extend(rows.clone().into_iter().map(|r| ReconstructionRow { z_r_target: 9.0, z_a: r.z_a + 1.0, ..r }));
        let l = ReconstructionLaw::new(rows).unwrap();
        assert!((l.query(600.0, 8.5).unwrap() - 8.9).abs() < 1e-12);
        assert!(l.query(600.0, 9.5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let l = law();
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("q,z_r_target,z_a\n"));
        assert_eq!(ReconstructionLaw::read_csv(buf.as_slice()).unwrap(), l);
    }
}
