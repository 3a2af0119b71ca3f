//! Files written by the runners: traces, metrics and SVG charts.
//!
//! Floats are written in shortest round-trip form, so parsing a trace gives
//! back the exact in-memory values.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::run::{RunResult, TraceRow};
use crate::error::{Error, Result};

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn traces_csv(trace: &[TraceRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in trace {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_traces(input: impl std::io::Read) -> Result<Vec<TraceRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub plant: String,
    pub period_s: f64,
    pub seed: u64,
    pub max_over: f64,
    pub max_under: f64,
    pub violation_time: f64,
    pub within_band: bool,
    pub band_halfwidth: f64,
    pub measured_transport_delay: Option<f64>,
    pub mass_defect_relative: Option<f64>,
}

impl MetricsRow {
    pub fn new(scenario: &str, plant: &str, period: f64, seed: u64, result: &RunResult) -> Self {
        let r = &result.report;
        Self {
            scenario: scenario.to_string(),
            plant: plant.to_string(),
            period_s: period,
            seed,
            max_over: r.max_over,
            max_under: r.max_under,
            violation_time: r.violation_time,
            within_band: r.within_band,
            band_halfwidth: r.band_halfwidth,
            measured_transport_delay: r.measured_transport_delay,
            mass_defect_relative: result.mass.map(|m| m.relative_to_volume()),
        }
    }

    pub fn max_excursion(&self) -> f64 {
        self.max_over.max(self.max_under)
    }
}

pub fn rows_csv<T: serde::Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_rows<T: serde::de::DeserializeOwned>(input: impl std::io::Read) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

struct Line<'a> {
    name: &'a str,
    color: &'a str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 320.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;

/// Tick spacing of 1, 2 or 5 times a power of ten giving about `n` ticks.
fn tick_step(span: f64, n: f64) -> f64 {
    let raw = span / n;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let nice = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn line_chart(title: &str, y_label: &str, lines: &[Line]) -> String {
    let all = lines.iter().flat_map(|l| l.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = if y1 > y0 { 0.05 * (y1 - y0) } else { 0.5 * y0.abs().max(1.0) };
    y0 -= pad;
    y1 += pad;
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{title}</text>"#, WIDTH / 2.0);

    let step = tick_step(y1 - y0, 6.0);
    let mut y = (y0 / step).ceil() * step;
    while y <= y1 {
        let py = sy(y);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, py + 4.0, fmt_tick(y, step));
        y += step;
    }
    let step = tick_step(x1 - x0, 8.0);
    let mut x = (x0 / step).ceil() * step;
    while x <= x1 {
        let px = sx(x);
        let _ = writeln!(s, r##"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{:.1}" stroke="#eee"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, fmt_tick(x, step));
        x += step;
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (h)</text>"#, LEFT + pw / 2.0, HEIGHT - 8.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y_label}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, line) in lines.iter().enumerate() {
        let mut d = String::new();
        for (k, &(x, y)) in line.points.iter().enumerate() {
            let _ = write!(d, "{}{:.1},{:.1}", if k == 0 { "M" } else { " L" }, sx(x), sy(y));
        }
        let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.2"{dash}/>"#, line.color);
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let lx = LEFT + pw - 150.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}"{dash}/>"#, lx + 20.0, line.color);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, line.name);
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10()).ceil() as usize };
    format!("{v:.decimals$}")
}

fn column(trace: &[TraceRow], f: impl Fn(&TraceRow) -> f64) -> Vec<(f64, f64)> {
    trace.iter().map(|r| (r.t_s / 3600.0, f(r))).collect()
}

/// The five chart files of a run, as `(file name, svg)`.
pub fn plots(trace: &[TraceRow], band_halfwidth: f64) -> Vec<(&'static str, String)> {
    let line = |name, color, dashed, points| Line { name, color, dashed, points };
    vec![
        (
            "inflow.svg",
            line_chart("Upstream inflow", "m3/s", &[line("q_e", "#1f77b4", false, column(trace, |r| r.q_e))]),
        ),
        (
            "perturbations.svg",
            line_chart(
                "Perturbations",
                "m3/s",
                &[
                    line("lock flushes w", "#1f77b4", false, column(trace, |r| r.w)),
                    line("outflow bias", "#d62728", false, column(trace, |r| r.bias)),
                ],
            ),
        ),
        (
            "command.svg",
            line_chart(
                "Command",
                "m3/s",
                &[
                    line("u applied", "#1f77b4", false, column(trace, |r| r.u_applied)),
                    line("q_e", "#7f7f7f", true, column(trace, |r| r.q_e)),
                ],
            ),
        ),
        (
            "z_tracking.svg",
            line_chart(
                "Near-actuator level",
                "m",
                &[
                    line("z", "#1f77b4", false, column(trace, |r| r.z)),
                    line("z*", "#d62728", true, column(trace, |r| r.z_star)),
                ],
            ),
        ),
        (
            "z_r_tracking.svg",
            line_chart(
                "Regulated level",
                "m",
                &[
                    line("z_r", "#1f77b4", false, column(trace, |r| r.z_r)),
                    line("z_r*", "#d62728", false, column(trace, |r| r.z_r_star)),
                    line("band", "#7f7f7f", true, column(trace, |r| r.z_r_star + band_halfwidth)),
                    line("", "#7f7f7f", true, column(trace, |r| r.z_r_star - band_halfwidth)),
                ],
            ),
        ),
    ]
}
