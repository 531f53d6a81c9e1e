use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spa_core::dynamics::{self, DynamicModel, Forcing};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spa-design"));
    cmd.env_remove("SPA_DESIGN_CONFIG");
    cmd
}

fn replica() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper_replica.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let base = std::fs::read_to_string(replica()).unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("{base}\n{extra}")).unwrap();
    path
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn eval_sweep_reaches_half_newton_metre() {
    let o = run(&["--config", replica().to_str().unwrap(), "--csv", "eval"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "pressure_MPa,torque_Nm,angle_deg,objective");
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 26);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 0.25);
    assert!((last[1] - 0.5).abs() / 0.5 < 0.05, "{last:?}");
    let at_015 = rows.iter().find(|r| (r[0] - 0.15).abs() < 1e-9).unwrap();
    assert!((at_015[3] - 2.36).abs() / 2.36 < 0.1);
}

#[test]
fn eval_single_zero_pressure_row() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(replica()).unwrap();
    let text = base
        .replace("pressure_max_MPa = 0.25", "pressure_max_MPa = 0.0")
        .replace("pressure_points = 26", "pressure_points = 1");
    let path = dir.path().join("zero.toml");
    std::fs::write(&path, text).unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "--csv", "eval"]);
    assert!(o.status.success());
    assert_eq!(csv_rows(&stdout(&o)), vec![vec![0.0, 0.0, 0.0, 0.0]]);
}

#[test]
fn optimize_reports_solver_and_oracle() {
    let o = run(&["--config", replica().to_str().unwrap(), "optimize"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("agree within one grid cell"), "{text}");
    assert!(text.contains(" solve ") && text.contains(" grid "));
}

#[test]
fn outputs_are_deterministic() {
    let config = replica();
    for cmd in ["optimize", "control", "eval"] {
        let a = run(&["--config", config.to_str().unwrap(), "--seed", "3", "--csv", cmd]);
        let b = run(&["--config", config.to_str().unwrap(), "--seed", "3", "--csv", cmd]);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn infeasible_band_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(replica()).unwrap();
    let text = base.replace(
        "grid_step_mm = 0.25",
        "grid_step_mm = 0.25\nfrequency_band_rad_s = [40.0, 50.0]\nmass_bounds_kg = [0.03, 0.04]",
    );
    let path = dir.path().join("band.toml");
    std::fs::write(&path, text).unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "optimize"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("frequency_min"), "{}", stderr(&o));
}

#[test]
fn band_lowers_height() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(replica()).unwrap();
    let text = base.replace(
        "grid_step_mm = 0.25",
        "grid_step_mm = 0.25\nfrequency_band_rad_s = [2.2, 2.4]\nmass_bounds_kg = [0.035677879714576963, 0.035677879714576963]",
    );
    let path = dir.path().join("band.toml");
    std::fs::write(&path, text).unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "--csv", "optimize"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let solve_row = stdout(&o).lines().nth(1).unwrap().to_string();
    let h: f64 = solve_row.split(',').nth(5).unwrap().parse().unwrap();
    assert!((h - 20.8).abs() <= 1.5, "{solve_row}");
}

#[test]
fn config_errors_exit_two() {
    let o = run(&["--config", "/nonexistent/run.toml", "eval"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[geometry]\na_mm = 1.0\nb_mm = 20.0\nw_mm = 30.0\nt_mm = 1.5\n").unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "eval"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("geometry.a_mm"), "{}", stderr(&o));

    std::fs::write(&path, "[geometry\n").unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "eval"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["eval"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_from_environment() {
    let o = bin()
        .env("SPA_DESIGN_CONFIG", replica())
        .args(["--csv", "freq"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn zero_weight_is_flagged_marginal() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(replica()).unwrap();
    let path = dir.path().join("p0.toml");
    std::fs::write(&path, base.replace("p = 100.0", "p = 0.0")).unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "control"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("marginal"), "{}", stderr(&o));
}

#[test]
fn control_writes_trace_and_damping_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["--config", replica().to_str().unwrap(), "--out", out.to_str().unwrap(), "control"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(out.join("control.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "time_s,reference_rad,angle_rad,command_revps");
    let rows = csv_rows(&trace);
    assert_eq!(rows.len(), 401);
    assert!(rows.iter().all(|r| r[3].abs() <= 5.0));
    let summary = std::fs::read_to_string(out.join("control_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| !l.contains("not settled")));
}

#[test]
fn freq_identifies_synthetic_trace() {
    let dir = tempfile::tempdir().unwrap();
    let model = DynamicModel::new(2.86, 0.7, 1.0, 0.0357).unwrap();
    let trace = dynamics::simulate_open_loop(&model, &Forcing::Constant(0.05), 0.01, 8.0).unwrap();
    let mut text = String::from("time_s,angle_rad\n");
    for (t, a) in trace.times.iter().zip(&trace.angles) {
        text.push_str(&format!("{t},{a}\n"));
    }
    let path = dir.path().join("step.csv");
    std::fs::write(&path, text).unwrap();
    let o = run(&["--config", replica().to_str().unwrap(), "--csv", "freq", "--trace", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    let (estimated, identified, zeta, error) = (rows[0][0], rows[0][1], rows[0][2], rows[0][3]);
    assert!((identified - 2.86).abs() / 2.86 < 0.02);
    assert!((zeta - 0.7).abs() / 0.7 < 0.02);
    assert!(((identified - estimated).abs() / identified * 100.0 - error).abs() < 1e-3);
}

#[test]
fn report_renders_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tables");
    let o = run(&["--config", replica().to_str().unwrap(), "--csv", "--out", out.to_str().unwrap(), "report"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["table1", "table2", "table3"] {
        assert!(out.join(format!("{name}.csv")).exists(), "{name}");
    }
    let t3 = std::fs::read_to_string(out.join("table3.csv")).unwrap();
    let est: Vec<f64> = t3
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!((est[1] - est[0]).abs() / est[0] < 0.01);
    assert!((est[2] / est[0] - 0.763).abs() < 0.001 * 5.0);
}

#[test]
fn report_skips_missing_sections() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("min.toml");
    std::fs::write(&path, "[geometry]\na_mm = 4.0\nb_mm = 20.0\nw_mm = 30.0\nt_mm = 1.5\n").unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "report"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("nothing to report"));
}

#[test]
fn fit_n_recovers_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("strain,stress_Pa\n");
    for i in 1..30 {
        let e = i as f64 * 0.05;
        text.push_str(&format!("{e},{}\n", 3.1e5 * e.powf(2.0)));
    }
    let path = dir.path().join("ss.csv");
    std::fs::write(&path, text).unwrap();
    let o = run(&["--csv", "fit-n", "--data", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let n: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((n - 2.0).abs() < 1e-6);
}

#[test]
fn replica_config_round_trips() {
    let c = spa_cli::parse_config(&replica()).unwrap();
    let again = spa_cli::config::parse_str(&spa_cli::config::to_toml(&c)).unwrap();
    assert_eq!(c, again);
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "");
    assert_eq!(spa_cli::parse_config(&path).unwrap(), c);
}
