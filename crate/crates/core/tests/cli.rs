use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hydro_mfc::cli::commands::SweepRow;
use hydro_mfc::cli::export::{read_rows, read_traces, MetricsRow};
use hydro_mfc::cli::DEFAULT_CONFIG;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hydro-mfc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn metrics(dir: &Path) -> MetricsRow {
    let rows: Vec<MetricsRow> = read_rows(fs::File::open(dir.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    rows.into_iter().next().unwrap()
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = DEFAULT_CONFIG.replace("alpha = \"9e5 m2\"", "alpha = \"9e5\"");
    let cfg = write_config(dir.path(), &bad);
    let out = run(&["run", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = write_config(dir.path(), "[geometry\nlength = ");
    assert_eq!(code(&run(&["calibrate", "--config", path(&cfg)])), 2);
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&run(&["run", "--config", path(&missing)])), 2);
}

#[test]
fn empty_or_invalid_period_list_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["sweep", "--out", path(dir.path()), "--periods"])), 2);
    assert_eq!(code(&run(&["sweep", "--out", path(dir.path()), "--periods", "120,-5"])), 2);
}

#[test]
fn scenario_2_run_stays_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "--scenario", "2", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let m = metrics(dir.path());
    assert!(m.within_band);
    assert_eq!(m.period_s, 120.0);
    assert!(m.mass_defect_relative.unwrap() < 1e-6);

    let trace = read_traces(fs::File::open(dir.path().join("traces.csv")).unwrap()).unwrap();
    assert_eq!(trace.len(), 4 * 24 * 30);
    let header = fs::read_to_string(dir.path().join("traces.csv")).unwrap();
    assert!(header.starts_with(
        "t_s,q_e,w,bias,u_raw,u_applied,saturated,F_hat,z,z_quant,z_star,z_r,z_r_quant,z_r_star\n"
    ));
    for svg in ["inflow.svg", "perturbations.svg", "command.svg", "z_tracking.svg", "z_r_tracking.svg"] {
        let text = fs::read_to_string(dir.path().join(svg)).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"), "{svg}");
    }
}

#[test]
fn scenario_3_saturates() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "--scenario", "3", "--out", path(dir.path())]);
    assert!(matches!(code(&out), 0 | 1));
    let trace = read_traces(fs::File::open(dir.path().join("traces.csv")).unwrap()).unwrap();
    assert!(trace.iter().any(|r| r.saturated));
    assert!(trace.iter().all(|r| (0.0..=1400.0).contains(&r.u_applied)));
}

#[test]
fn calibration_writes_the_grid_and_is_repeatable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["calibrate", "--out", path(a.path())])), 0);
    assert_eq!(code(&run(&["calibrate", "--out", path(b.path())])), 0);
    let ta = fs::read(a.path().join("reconstruction.csv")).unwrap();
    let tb = fs::read(b.path().join("reconstruction.csv")).unwrap();
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);

    // A run can consume the table instead of recalibrating.
    let cfg = DEFAULT_CONFIG.replace(
        "# reconstruction = \"reconstruction.csv\"",
        "reconstruction = \"reconstruction.csv\"",
    );
    let cfg = write_config(a.path(), &cfg);
    let out = a.path().join("run");
    let res = run(&["run", "--config", path(&cfg), "--scenario", "2", "--out", path(&out)]);
    assert_eq!(code(&res), 0);
}

#[test]
fn single_period_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let sweep_dir = dir.path().join("sweep");
    run(&["run", "--scenario", "2", "--out", path(&run_dir)]);
    let out = run(&["sweep", "--scenario", "2", "--periods", "120", "--out", path(&sweep_dir)]);
    assert!(matches!(code(&out), 0 | 1));
    let rows: Vec<SweepRow> = read_rows(fs::File::open(sweep_dir.join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    let m = metrics(&run_dir);
    assert_eq!(rows[0].max_excursion, m.max_excursion());
    assert_eq!(
        fs::read(run_dir.join("traces.csv")).unwrap(),
        fs::read(sweep_dir.join("period_120s").join("traces.csv")).unwrap()
    );
}

#[test]
fn surrogate_plant_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "--plant", "surrogate", "--scenario", "2", "--out", path(dir.path())]);
    assert!(matches!(code(&out), 0 | 1), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(metrics(dir.path()).plant, "surrogate");
    assert!(metrics(dir.path()).mass_defect_relative.is_none());
}

#[test]
fn draining_the_reach_is_a_simulation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = r#"
name = "drain"
source = "test"
version = 1
duration = "2 d"
bias = false

[setpoint]
points = [{ t = "0 h", value = "8 m" }]

[inflow]
points = [{ t = "0 h", value = "700 m3/s" }, { t = "1 h", value = "1 m3/s" }]

[flushes]
count = 0
amplitude = "100 m3/s"
duration = "15 min"
grid = "10 min"
"#;
    fs::write(dir.path().join("drain.toml"), scenario).unwrap();
    let cfg = DEFAULT_CONFIG
        .replace("u_min = \"0 m3/s\"", "u_min = \"600 m3/s\"")
        .replace("number = 1", "number = 1\nfile = \"drain.toml\"");
    let cfg = write_config(dir.path(), &cfg);
    let out = run(&["run", "--config", path(&cfg), "--out", path(&dir.path().join("out"))]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    // The collapsing depth trips either the CFL check or the dry-bed check.
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulation failure"));
}
