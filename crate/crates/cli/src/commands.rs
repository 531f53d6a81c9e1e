//! Subcommand bodies. Each returns the tables it produced; [`emit`] writes
//! them as text, CSV on stdout, or CSV files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use spa_core::control::{self, ClosedLoopSettings, LqrDesign, Measurement};
use spa_core::dynamics::{self, StepTrace};
use spa_core::geometry::{self, CrossSection};
use spa_core::kinematics;
use spa_core::optimizer::{self, DesignSpace, OptimizationResult, SolverOptions};
use spa_core::SpaError;

use crate::config::RunConfig;
use crate::error::CliError;

/// A named table; `name` doubles as the CSV file stem.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Usage(format!("csv: {e}")))
    }

    fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        };
        line(&self.header, &mut out);
        for row in &self.rows {
            line(row, &mut out);
        }
        out
    }
}

/// Command output: free-form summary lines plus tables.
#[derive(Debug, Default)]
pub struct Report {
    pub notes: Vec<String>,
    pub tables: Vec<Table>,
}

/// Longer tables are only written as CSV.
const TEXT_ROW_LIMIT: usize = 60;

pub struct OutputOptions {
    pub csv: bool,
    pub out_dir: Option<PathBuf>,
}

/// Writes a report: text or CSV to `stdout`, and CSV files under `out_dir`.
pub fn emit(report: &Report, opts: &OutputOptions, stdout: &mut dyn Write) -> Result<(), CliError> {
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        for table in &report.tables {
            std::fs::write(dir.join(format!("{}.csv", table.name)), table.to_csv()?)?;
        }
    }
    if opts.csv {
        for (i, table) in report.tables.iter().enumerate() {
            if report.tables.len() > 1 {
                if i > 0 {
                    writeln!(stdout)?;
                }
                writeln!(stdout, "# {}", table.name)?;
            }
            stdout.write_all(&table.to_csv()?)?;
        }
    } else {
        for note in &report.notes {
            writeln!(stdout, "{note}")?;
        }
        for table in &report.tables {
            writeln!(stdout, "\n[{}]", table.name)?;
            if table.rows.len() > TEXT_ROW_LIMIT {
                writeln!(stdout, "{} rows; use --csv or --out for the full table", table.rows.len())?;
            } else {
                stdout.write_all(table.to_text().as_bytes())?;
            }
        }
    }
    Ok(())
}

fn fx(v: f64, digits: usize) -> String {
    format!("{v:.digits$}")
}

fn mm4(cs: &CrossSection) -> Vec<String> {
    cs.to_mm().iter().map(|v| fx(*v, 3)).collect()
}

pub fn eval(cfg: &RunConfig) -> Result<Report, CliError> {
    let design = cfg.design()?;
    let norms = cfg.normalizers();
    let sim = &cfg.sim;
    let mut table = Table::new("eval", &["pressure_MPa", "torque_Nm", "angle_deg", "objective"]);
    let points = sim.pressure_points;
    for k in 0..points {
        let p_mpa = if points == 1 {
            sim.pressure_max_mpa
        } else {
            sim.pressure_max_mpa * k as f64 / (points - 1) as f64
        };
        let p = p_mpa * 1e6;
        let torque = kinematics::torque(&design, p)?.total;
        let bend = kinematics::bending_angle(&design, p)?;
        let objective = kinematics::normalized_objective(&design, p, &norms)?;
        table.push(vec![
            fx(p_mpa, 4),
            fx(torque, 6),
            fx(bend.angle.to_degrees(), 4),
            fx(objective, 6),
        ]);
    }
    let o = cfg.optimize_or_default();
    let p_eval = o.pressure_mpa * 1e6;
    let notes = vec![
        format!("section (a, b, w, t) = ({}) mm", mm4(&design.section).join(", ")),
        format!(
            "at {:.3} MPa: torque {:.4} N·m, angle {:.1} deg, objective {:.4}",
            o.pressure_mpa,
            kinematics::torque(&design, p_eval)?.total,
            kinematics::bending_angle(&design, p_eval)?.angle.to_degrees(),
            kinematics::normalized_objective(&design, p_eval, &norms)?
        ),
    ];
    Ok(Report {
        notes,
        tables: vec![table],
    })
}

fn result_row(label: &str, r: &OptimizationResult) -> Vec<String> {
    let mut row = vec![label.to_string()];
    row.extend(mm4(&r.params));
    row.push(fx(r.params.height() * 1e3, 3));
    row.push(fx(r.objective, 6));
    row.push(r.iterations.to_string());
    row.push(r.active_constraints.join(" "));
    row
}

fn infeasible_with_certificate(problem: &optimizer::Problem, err: SpaError) -> CliError {
    match (&err, optimizer::check_feasibility(problem)) {
        (SpaError::Infeasible(_), Ok(report)) if !report.feasible => {
            CliError::Infeasible(report.certificate)
        }
        _ => err.into(),
    }
}

pub fn optimize(cfg: &RunConfig, seed: u64) -> Result<Report, CliError> {
    let problem = cfg.problem();
    let o = cfg.optimize_or_default();
    let opts = SolverOptions {
        starts: o.starts.max(8),
        seed,
        ..SolverOptions::default()
    };
    let solved =
        optimizer::solve(&problem, &opts).map_err(|e| infeasible_with_certificate(&problem, e))?;
    let step = o.grid_step_mm * 1e-3;
    let grid = optimizer::grid_oracle(&problem, step)?;
    let mut table = Table::new(
        "optimize",
        &["method", "a_mm", "b_mm", "w_mm", "t_mm", "h_mm", "objective", "iterations", "active_constraints"],
    );
    table.push(result_row("solve", &solved));
    table.push(result_row("grid", &grid));
    let (s, g) = (solved.params.to_mm(), grid.params.to_mm());
    let gap = (0..4).map(|i| (s[i] - g[i]).abs()).fold(0.0, f64::max);
    let mut notes = vec![format!(
        "objective at {:.3} MPa; optimum rounded to 0.5 mm (a, b, w, t) = ({}) mm",
        o.pressure_mpa,
        s.iter().map(|v| format!("{:.1}", (v * 2.0).round() / 2.0)).collect::<Vec<_>>().join(", ")
    )];
    if gap > o.grid_step_mm + 1e-9 {
        notes.push(format!(
            "WARNING: solve and grid oracle differ by {gap:.3} mm, more than one grid cell ({} mm)",
            o.grid_step_mm
        ));
    } else {
        notes.push(format!("solve and grid oracle agree within one grid cell ({gap:.3} mm)"));
    }
    Ok(Report {
        notes,
        tables: vec![table],
    })
}

fn read_trace(path: &Path) -> Result<StepTrace, CliError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str, fallback: usize| headers.iter().position(|h| h.trim() == name).unwrap_or(fallback);
    let (ti, ai) = (col("time_s", 0), col("angle_rad", 1));
    let mut trace = StepTrace {
        times: Vec::new(),
        angles: Vec::new(),
        velocities: Vec::new(),
    };
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<f64, CliError> {
            record
                .get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| CliError::Usage(format!("{}: bad value on data row {}", path.display(), line + 1)))
        };
        trace.times.push(parse(ti)?);
        trace.angles.push(parse(ai)?);
        trace.velocities.push(0.0);
    }
    Ok(trace)
}

pub fn freq(cfg: &RunConfig, trace: Option<&Path>) -> Result<Report, CliError> {
    let design = cfg.design()?;
    let estimate = dynamics::natural_frequency(&design)?;
    let mass = geometry::mass(&design)?;
    let mut notes = vec![format!(
        "estimated natural frequency {estimate:.4} rad/s (mass {mass:.5} kg, n = {})",
        design.material.exponent
    )];
    let mut table = Table::new(
        "freq",
        &["estimated_rad_s", "identified_rad_s", "damping_ratio", "error_percent"],
    );
    match trace {
        Some(path) => {
            let id = dynamics::identify_second_order(&read_trace(path)?, 1.0)?;
            let error = (id.natural_frequency - estimate).abs() / id.natural_frequency * 100.0;
            notes.push(format!(
                "identified {:.4} rad/s, zeta {:.4} (fit residual {:.2e}); estimate error {error:.2}%",
                id.natural_frequency, id.damping_ratio, id.residual
            ));
            table.push(vec![
                fx(estimate, 6),
                fx(id.natural_frequency, 6),
                fx(id.damping_ratio, 6),
                fx(error, 4),
            ]);
        }
        None => table.push(vec![fx(estimate, 6), String::new(), String::new(), String::new()]),
    }
    Ok(Report {
        notes,
        tables: vec![table],
    })
}

pub fn control_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let design = cfg.design()?;
    let c = cfg.control_or_default();
    let mass = geometry::mass(&design)?;
    let omega = match c.natural_frequency_rad_s {
        Some(w) => w,
        None => dynamics::natural_frequency(&design)?,
    };
    let zeta = cfg.material.zeta;
    let ss = control::build_state_space(omega, zeta, &cfg.pump(), mass)?;
    let lqr = LqrDesign::synthesize(&ss, c.p, c.r)?;
    let stable = control::lyapunov_check(&lqr.y, &lqr.closed_loop_matrix(&ss));
    let settings = ClosedLoopSettings {
        reference: c.reference_deg.to_radians(),
        dt: c.dt_ms * 1e-3,
        duration: c.duration_s,
        saturation: c.saturation_revps,
        zeta_offset: 0.0,
        measurement: match c.measurement.as_str() {
            "finite_difference" => Measurement::FiniteDifference {
                filter_tau: c.filter_tau_ms * 1e-3,
            },
            _ => Measurement::Exact,
        },
    };
    let perturb = cfg.material.zeta_perturb;
    let offsets: Vec<f64> = if perturb > 0.0 { vec![0.0, -perturb, perturb] } else { vec![0.0] };
    let mut summary = Table::new(
        "control_summary",
        &["plant_zeta", "settling_s", "steady_state_error_rad", "max_abs_command_revps"],
    );
    let mut nominal = None;
    for offset in offsets {
        let trace = control::simulate_closed_loop(&ss, &lqr.gain, &ClosedLoopSettings { zeta_offset: offset, ..settings })?;
        summary.push(vec![
            fx(zeta + offset, 3),
            trace.settling_time.map(|t| fx(t, 3)).unwrap_or_else(|| "not settled".into()),
            fx(trace.steady_state_error, 6),
            fx(trace.command.iter().fold(0.0f64, |m, u| m.max(u.abs())), 4),
        ]);
        if nominal.is_none() {
            nominal = Some(trace);
        }
    }
    let nominal = nominal.expect("nominal run");
    let mut trace_table = Table::new("control", &["time_s", "reference_rad", "angle_rad", "command_revps"]);
    for i in 0..nominal.times.len() {
        trace_table.push(vec![
            fx(nominal.times[i], 4),
            fx(nominal.reference[i], 6),
            fx(nominal.angle[i], 6),
            fx(nominal.command[i], 6),
        ]);
    }
    let poles = lqr
        .closed_loop_poles(&ss)
        .iter()
        .map(|p| format!("{:.4}{:+.4}j", p.re, p.im))
        .collect::<Vec<_>>()
        .join(", ");
    let notes = vec![
        format!(
            "plant: omega_n {omega:.4} rad/s, zeta {zeta}, pump gain {:.4}",
            ss.plant_gain
        ),
        format!(
            "LQR p = {}, R = {}: gain [{:.4}, {:.4}, {:.4}], closed-loop poles [{poles}], Lyapunov {}",
            c.p,
            c.r,
            lqr.gain[0],
            lqr.gain[1],
            lqr.gain[2],
            if stable { "stable" } else { "NOT verified" }
        ),
        format!(
            "step {:.1} deg: settling {} s, steady-state error {:.2e} rad",
            c.reference_deg,
            nominal.settling_time.map(|t| format!("{t:.3}")).unwrap_or_else(|| "n/a".into()),
            nominal.steady_state_error
        ),
    ];
    Ok(Report {
        notes,
        tables: vec![summary, trace_table],
    })
}

struct PaperRow {
    label: &'static str,
    section: [f64; 4],
    objective: Option<f64>,
}

const TABLE1: [PaperRow; 7] = [
    PaperRow { label: "optimal", section: [4.0, 20.0, 30.0, 1.5], objective: Some(2.36) },
    PaperRow { label: "variance 1", section: [4.0, 20.0, 29.0, 1.5], objective: Some(2.30) },
    PaperRow { label: "variance 2", section: [4.0, 20.0, 28.0, 1.5], objective: None },
    PaperRow { label: "variance 3", section: [3.5, 20.5, 30.0, 1.5], objective: None },
    PaperRow { label: "variance 4", section: [3.0, 21.0, 30.0, 1.5], objective: None },
    PaperRow { label: "variance 5", section: [4.0, 20.0, 30.0, 1.75], objective: None },
    PaperRow { label: "variance 6", section: [4.0, 20.0, 30.0, 2.0], objective: None },
];

/// Bands and reported heights (a + b, mm).
const TABLE2: [([f64; 2], f64); 4] = [
    ([2.5, 3.5], 24.0),
    ([2.4, 2.6], 23.3),
    ([2.2, 2.4], 20.8),
    ([1.6, 1.8], 18.4),
];

fn opt_cell(v: Option<f64>, digits: usize) -> String {
    v.map(|x| fx(x, digits)).unwrap_or_default()
}

pub fn report(cfg: &RunConfig, seed: u64) -> Result<Report, CliError> {
    let mut out = Report::default();
    if cfg.optimize.is_some() {
        let problem = cfg.problem();
        let norms = cfg.normalizers();
        let mut t1 = Table::new(
            "table1",
            &["design", "a_mm", "b_mm", "w_mm", "t_mm", "objective", "paper_objective", "delta"],
        );
        for row in &TABLE1 {
            let [a, b, w, t] = row.section;
            let value = CrossSection::from_mm(a, b, w, t)
                .map(|cs| optimizer::evaluate(&cs, &problem.material, problem.length, problem.pressure, &norms))
                .unwrap_or(f64::NEG_INFINITY);
            t1.push(vec![
                row.label.into(),
                fx(a, 2),
                fx(b, 2),
                fx(w, 2),
                fx(t, 2),
                fx(value, 4),
                opt_cell(row.objective, 2),
                opt_cell(row.objective.map(|p| value - p), 4),
            ]);
        }
        let opts = SolverOptions { seed, ..SolverOptions::default() };
        match optimizer::solve(&problem, &opts) {
            Ok(r) => {
                let mut row = vec!["computed optimum".to_string()];
                row.extend(r.params.to_mm().iter().map(|v| fx(*v, 2)));
                row.extend([fx(r.objective, 4), String::new(), String::new()]);
                t1.push(row);
            }
            Err(e) => out.notes.push(format!("table 1: optimizer failed: {e}")),
        }
        out.tables.push(t1);

        let mass = match cfg.optimize_or_default().mass_bounds_kg {
            Some(bounds) => bounds,
            None => {
                let m = geometry::mass(&cfg.design()?)?;
                [m, m]
            }
        };
        let mut t2 = Table::new(
            "table2",
            &["omega_lo", "omega_hi", "a_mm", "b_mm", "w_mm", "t_mm", "h_mm", "paper_h_mm", "delta_h_mm"],
        );
        for ([lo, hi], paper_h) in TABLE2 {
            let space = DesignSpace {
                frequency_band: Some((lo, hi)),
                mass_bounds: Some((mass[0], mass[1])),
                ..problem.space
            };
            let banded = optimizer::Problem { space, ..problem };
            let mut row = vec![fx(lo, 2), fx(hi, 2)];
            match optimizer::solve(&banded, &opts) {
                Ok(r) => {
                    let h = r.params.height() * 1e3;
                    row.extend(r.params.to_mm().iter().map(|v| fx(*v, 2)));
                    row.extend([fx(h, 2), fx(paper_h, 1), fx(h - paper_h, 2)]);
                }
                Err(e) => {
                    row.extend(["infeasible".to_string(), String::new(), String::new(), String::new(), String::new()]);
                    row.extend([fx(paper_h, 1), String::new()]);
                    out.notes.push(format!("table 2 band [{lo}, {hi}]: {e}"));
                }
            }
            t2.push(row);
        }
        out.tables.push(t2);
    }

    if let Some(weight_kg) = cfg.actuator.mass_override_kg {
        let d1 = cfg.design()?;
        let mut d2 = d1;
        d2.section.width -= 1e-3;
        d2.mass_override = Some(weight_kg * 0.34 / 0.35);
        let mut d3 = d1;
        d3.material.youngs_modulus *= 0.26 / 0.34;
        d3.mass_override = Some(weight_kg * 0.46 / 0.35);
        let mut t3 = Table::new(
            "table3",
            &["design", "E_MPa", "mass_kg", "estimated_rad_s", "paper_estimated_rad_s", "delta", "paper_true_rad_s", "error_vs_true_percent"],
        );
        for (label, d, paper_est, paper_true) in
            [("design 1", d1, 2.62, 2.86), ("design 2", d2, 2.62, 2.78), ("design 3", d3, 2.01, 1.72)]
        {
            let est = dynamics::natural_frequency(&d)?;
            t3.push(vec![
                label.into(),
                fx(d.material.youngs_modulus * 1e-6, 3),
                fx(geometry::mass(&d)?, 5),
                fx(est, 4),
                fx(paper_est, 2),
                fx(est - paper_est, 4),
                fx(paper_true, 2),
                fx((paper_true - est).abs() / paper_true * 100.0, 2),
            ]);
        }
        out.tables.push(t3);
    }
    if out.tables.is_empty() {
        out.notes.push(
            "nothing to report: add an [optimize] section (tables 1-2) or actuator.mass_override_kg (table 3)".into(),
        );
    }
    Ok(out)
}

pub fn fit_n(data: &Path) -> Result<Report, CliError> {
    let mut reader = csv::Reader::from_path(data)?;
    let mut samples = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let value = |i: usize| -> Result<f64, CliError> {
            record
                .get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| CliError::Usage(format!("{}: bad value on data row {}", data.display(), line + 1)))
        };
        samples.push((value(0)?, value(1)?));
    }
    let (c, n) = dynamics::fit_stress_strain(&samples)?;
    let mut table = Table::new("fit_n", &["coefficient", "exponent", "samples"]);
    table.push(vec![format!("{c:.6e}"), fx(n, 6), samples.len().to_string()]);
    Ok(Report {
        notes: vec![format!("sigma = {c:.6e} * strain^{n:.6} ({} samples)", samples.len())],
        tables: vec![table],
    })
}
