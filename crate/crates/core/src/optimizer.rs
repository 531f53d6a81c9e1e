//! Cross-section optimization: maximize the normalized torque-plus-angle
//! objective over a box of `(a, b, w, t)` with a height band and an optional
//! natural-frequency band.
//!
//! [`solve`] is a multi-start augmented-Lagrangian method whose inner solver
//! is projected gradient over the normalized box. [`grid_oracle`] is the
//! brute-force reference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics;
use crate::error::{Result, SpaError};
use crate::geometry::{ActuatorDesign, CrossSection, Material};
use crate::kinematics::{self, Normalizers};

/// Largest number of points [`grid_oracle`] will evaluate.
pub const GRID_LIMIT: u128 = 10_000_000;

/// Tolerance on normalized constraint violation for a point to count as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const ACTIVE_TOL: f64 = 1e-6;

/// Search box in metres, with optional frequency (rad/s) and mass (kg) bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub a_bounds: (f64, f64),
    pub b_bounds: (f64, f64),
    pub h_bounds: (f64, f64),
    pub w_bounds: (f64, f64),
    pub t_bounds: (f64, f64),
    pub frequency_band: Option<(f64, f64)>,
    /// When absent, each candidate's own wall-mass estimate is used.
    pub mass_bounds: Option<(f64, f64)>,
}

impl Default for DesignSpace {
    fn default() -> Self {
        Self {
            a_bounds: (2e-3, 5e-3),
            b_bounds: (14e-3, 24e-3),
            h_bounds: (15e-3, 25e-3),
            w_bounds: (10e-3, 30e-3),
            t_bounds: (1.5e-3, 3e-3),
            frequency_band: None,
            mass_bounds: None,
        }
    }
}

fn check_interval(name: &'static str, (lo, hi): (f64, f64), positive: bool) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(SpaError::param(name, format!("need lo <= hi, got [{lo}, {hi}]")));
    }
    if positive && lo <= 0.0 {
        return Err(SpaError::param(name, format!("must be positive, got [{lo}, {hi}]")));
    }
    Ok(())
}

impl DesignSpace {
    pub fn validate(&self) -> Result<()> {
        check_interval("a_bounds", self.a_bounds, true)?;
        check_interval("b_bounds", self.b_bounds, true)?;
        check_interval("h_bounds", self.h_bounds, true)?;
        check_interval("w_bounds", self.w_bounds, true)?;
        check_interval("t_bounds", self.t_bounds, true)?;
        if let Some(band) = self.frequency_band {
            check_interval("frequency_band", band, true)?;
        }
        if let Some(mass) = self.mass_bounds {
            check_interval("mass_bounds", mass, true)?;
        }
        let (h_min, h_max) = self.height_range();
        if h_min > h_max {
            return Err(SpaError::Infeasible(format!(
                "height band [{:.3}, {:.3}] mm does not meet a + b range [{:.3}, {:.3}] mm",
                self.h_bounds.0 * 1e3,
                self.h_bounds.1 * 1e3,
                (self.a_bounds.0 + self.b_bounds.0) * 1e3,
                (self.a_bounds.1 + self.b_bounds.1) * 1e3
            )));
        }
        Ok(())
    }

    /// Achievable `a + b` range inside the height band.
    pub fn height_range(&self) -> (f64, f64) {
        (
            self.h_bounds.0.max(self.a_bounds.0 + self.b_bounds.0),
            self.h_bounds.1.min(self.a_bounds.1 + self.b_bounds.1),
        )
    }

    fn lower(&self) -> [f64; 4] {
        [self.a_bounds.0, self.b_bounds.0, self.w_bounds.0, self.t_bounds.0]
    }

    fn upper(&self) -> [f64; 4] {
        [self.a_bounds.1, self.b_bounds.1, self.w_bounds.1, self.t_bounds.1]
    }
}

/// Everything the objective and constraints need besides the search box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub space: DesignSpace,
    pub material: Material,
    /// Initial actuator length (m).
    pub length: f64,
    /// Evaluation pressure (Pa).
    pub pressure: f64,
    pub normalizers: Normalizers,
}

impl Problem {
    pub fn new(space: DesignSpace, material: Material, length: f64, pressure: f64) -> Self {
        Self {
            space,
            material,
            length,
            pressure,
            normalizers: Normalizers::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.material.validate()?;
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(SpaError::param("length", "must be positive"));
        }
        if !(self.pressure.is_finite() && self.pressure >= 0.0) {
            return Err(SpaError::param("pressure", "must be non-negative"));
        }
        if !(self.normalizers.torque > 0.0 && self.normalizers.angle > 0.0) {
            return Err(SpaError::param("normalizers", "must be positive"));
        }
        Ok(())
    }

    fn frequency_constraint(&self) -> Result<Option<FrequencyConstraint>> {
        let Some((lo, hi)) = self.space.frequency_band else {
            return Ok(None);
        };
        Ok(Some(match self.space.mass_bounds {
            Some((m_lo, m_hi)) => {
                let (c1, c2) = dynamics::frequency_constraint_bounds(
                    lo,
                    hi,
                    m_lo,
                    m_hi,
                    self.length,
                    self.material.exponent,
                )?;
                FrequencyConstraint::Stiffness { c1, c2 }
            }
            None => FrequencyConstraint::OwnMass { lo, hi },
        }))
    }
}

/// How the frequency band enters the program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrequencyConstraint {
    /// `C1 ≤ E·w·(a+b)^(n+2) ≤ C2` from a mass range.
    Stiffness { c1: f64, c2: f64 },
    /// `lo ≤ ω_n ≤ hi` with each candidate's own mass.
    OwnMass { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub params: CrossSection,
    pub objective: f64,
    pub iterations: usize,
    pub active_constraints: Vec<String>,
    pub feasible: bool,
}

/// Normalized objective of one section; `f64::NEG_INFINITY` marks a rejected point.
pub fn evaluate(
    section: &CrossSection,
    material: &Material,
    length: f64,
    pressure: f64,
    normalizers: &Normalizers,
) -> f64 {
    let Ok(design) = ActuatorDesign::new(*section, *material, length) else {
        return f64::NEG_INFINITY;
    };
    kinematics::normalized_objective(&design, pressure, normalizers).unwrap_or(f64::NEG_INFINITY)
}

/// Compiled constraint set; every entry is `g(x) ≤ 0` in dimensionless units.
struct Constraints<'a> {
    problem: &'a Problem,
    frequency: Option<FrequencyConstraint>,
    h_scale: f64,
}

impl<'a> Constraints<'a> {
    fn new(problem: &'a Problem) -> Result<Self> {
        let (h_lo, h_hi) = problem.space.h_bounds;
        Ok(Self {
            problem,
            frequency: problem.frequency_constraint()?,
            h_scale: h_hi.max(h_lo),
        })
    }

    fn names(&self) -> Vec<&'static str> {
        let mut names = vec!["h_min", "h_max"];
        if self.frequency.is_some() {
            names.extend(["frequency_min", "frequency_max"]);
        }
        names
    }

    /// `None` for geometrically invalid points.
    fn values(&self, x: &[f64; 4]) -> Option<Vec<f64>> {
        let cs = section_of(x);
        cs.validate().ok()?;
        let h = x[0] + x[1];
        let (h_lo, h_hi) = self.problem.space.h_bounds;
        let mut g = vec![(h_lo - h) / self.h_scale, (h - h_hi) / self.h_scale];
        match self.frequency {
            None => {}
            Some(FrequencyConstraint::Stiffness { c1, c2 }) => {
                let s = dynamics::stiffness_measure(
                    &cs,
                    self.problem.material.youngs_modulus,
                    self.problem.material.exponent,
                )
                .ln();
                g.push(c1.ln() - s);
                g.push(s - c2.ln());
            }
            Some(FrequencyConstraint::OwnMass { lo, hi }) => {
                let design =
                    ActuatorDesign::new(cs, self.problem.material, self.problem.length).ok()?;
                let w = dynamics::natural_frequency(&design).ok()?.ln();
                g.push(lo.ln() - w);
                g.push(w - hi.ln());
            }
        }
        Some(g)
    }

    fn violation(&self, x: &[f64; 4]) -> f64 {
        match self.values(x) {
            Some(g) => g.into_iter().fold(0.0, |m, v| m.max(v)),
            None => f64::INFINITY,
        }
    }

    fn objective(&self, x: &[f64; 4]) -> f64 {
        let p = self.problem;
        evaluate(&section_of(x), &p.material, p.length, p.pressure, &p.normalizers)
    }

    fn active(&self, x: &[f64; 4]) -> Vec<String> {
        let space = &self.problem.space;
        let (lo, hi) = (space.lower(), space.upper());
        let labels = ["a", "b", "w", "t"];
        let mut active = Vec::new();
        for i in 0..4 {
            let span = (hi[i] - lo[i]).max(1e-12);
            if (x[i] - lo[i]) / span < ACTIVE_TOL {
                active.push(format!("{}_min", labels[i]));
            }
            if (hi[i] - x[i]) / span < ACTIVE_TOL {
                active.push(format!("{}_max", labels[i]));
            }
        }
        if let Some(g) = self.values(x) {
            for (name, v) in self.names().into_iter().zip(g) {
                if v > -ACTIVE_TOL {
                    active.push(name.to_string());
                }
            }
        }
        active
    }
}

fn section_of(x: &[f64; 4]) -> CrossSection {
    CrossSection {
        a: x[0],
        b: x[1],
        width: x[2],
        wall_thickness: x[3],
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Number of multi-start points (at least 8 are used).
    pub starts: usize,
    pub seed: u64,
    /// Projected-gradient stationarity tolerance in normalized coordinates.
    pub optimality_tol: f64,
    /// Smallest accepted step in normalized coordinates.
    pub step_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0,
            optimality_tol: 1e-9,
            step_tol: 1e-14,
            max_outer: 40,
            max_inner: 3000,
        }
    }
}

/// Normalized box coordinates `z ∈ [0, 1]⁴`.
struct BoxMap {
    lo: [f64; 4],
    span: [f64; 4],
}

impl BoxMap {
    fn new(space: &DesignSpace) -> Self {
        let lo = space.lower();
        let hi = space.upper();
        let mut span = [0.0; 4];
        for i in 0..4 {
            span[i] = hi[i] - lo[i];
        }
        Self { lo, span }
    }

    fn to_x(&self, z: &[f64; 4]) -> [f64; 4] {
        let mut x = [0.0; 4];
        for i in 0..4 {
            x[i] = self.lo[i] + z[i] * self.span[i];
        }
        x
    }
}

fn project(z: &mut [f64; 4]) {
    for v in z.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

struct StartOutcome {
    x: [f64; 4],
    objective: f64,
    violation: f64,
    iterations: usize,
}

/// Minimizes `−weight·f + AL penalty` from `z0`. `weight = 0` turns this into
/// a pure feasibility search.
fn run_start(
    cons: &Constraints,
    map: &BoxMap,
    z0: [f64; 4],
    weight: f64,
    opts: &SolverOptions,
) -> Option<StartOutcome> {
    let m = cons.names().len();
    let mut lambda = vec![0.0; m];
    let mut mu = 10.0;
    let mut z = z0;
    let mut iterations = 0;
    let mut last_violation = f64::INFINITY;

    let merit = |z: &[f64; 4], lambda: &[f64], mu: f64| -> Option<f64> {
        let x = map.to_x(z);
        let g = cons.values(&x)?;
        let f = if weight == 0.0 { 0.0 } else { cons.objective(&x) };
        if !f.is_finite() {
            return None;
        }
        let penalty: f64 = g
            .iter()
            .zip(lambda)
            .map(|(gi, li)| {
                let s = (li + mu * gi).max(0.0);
                (s * s - li * li) / (2.0 * mu)
            })
            .sum();
        Some(-weight * f + penalty)
    };

    merit(&z, &lambda, mu)?;
    for _ in 0..opts.max_outer {
        let (z_new, used) = projected_gradient(&|z| merit(z, &lambda, mu), z, opts);
        z = z_new;
        iterations += used;
        let g = cons.values(&map.to_x(&z))?;
        for (li, gi) in lambda.iter_mut().zip(&g) {
            *li = (*li + mu * gi).max(0.0);
        }
        let violation = g.iter().fold(0.0f64, |acc, v| acc.max(*v));
        if violation <= 0.1 * FEASIBILITY_TOL {
            let stationary = projected_gradient(&|z| merit(z, &lambda, mu), z, opts).1 <= 1;
            if stationary {
                break;
            }
        } else if violation > 0.25 * last_violation {
            mu = (mu * 10.0).min(1e12);
        }
        last_violation = violation;
    }
    let x = map.to_x(&z);
    Some(StartOutcome {
        x,
        objective: cons.objective(&x),
        violation: cons.violation(&x),
        iterations,
    })
}

/// Projected gradient with Barzilai–Borwein step guess and Armijo backtracking.
/// Returns the final point and the number of accepted steps.
fn projected_gradient(
    phi: &dyn Fn(&[f64; 4]) -> Option<f64>,
    z0: [f64; 4],
    opts: &SolverOptions,
) -> ([f64; 4], usize) {
    let mut z = z0;
    let Some(mut value) = phi(&z) else {
        return (z, 0);
    };
    let mut grad = gradient(phi, &z, value);
    let mut alpha = 1e-2;
    for iter in 0..opts.max_inner {
        let mut pg = z;
        for i in 0..4 {
            pg[i] -= grad[i];
        }
        project(&mut pg);
        let stationarity = (0..4).map(|i| (pg[i] - z[i]).abs()).fold(0.0, f64::max);
        if stationarity < opts.optimality_tol {
            return (z, iter);
        }
        let mut accepted = None;
        let mut step = alpha;
        while step > 1e-20 {
            let mut trial = z;
            for i in 0..4 {
                trial[i] -= step * grad[i];
            }
            project(&mut trial);
            let decrease: f64 = (0..4).map(|i| grad[i] * (trial[i] - z[i])).sum();
            if let Some(v) = phi(&trial) {
                if v <= value + 1e-4 * decrease {
                    accepted = Some((trial, v));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, next_value)) = accepted else {
            return (z, iter);
        };
        let next_grad = gradient(phi, &next, next_value);
        let (mut ss, mut sy) = (0.0, 0.0);
        let mut moved = 0.0f64;
        for i in 0..4 {
            let s = next[i] - z[i];
            let y = next_grad[i] - grad[i];
            ss += s * s;
            sy += s * y;
            moved = moved.max(s.abs());
        }
        alpha = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e3) } else { (step * 4.0).min(1e3) };
        z = next;
        value = next_value;
        grad = next_grad;
        if moved < opts.step_tol {
            return (z, iter + 1);
        }
    }
    (z, opts.max_inner)
}

/// Finite-difference gradient in normalized coordinates, one-sided at the box
/// faces and where the domain ends.
fn gradient(phi: &dyn Fn(&[f64; 4]) -> Option<f64>, z: &[f64; 4], value: f64) -> [f64; 4] {
    let h = 1e-7;
    let mut g = [0.0; 4];
    for i in 0..4 {
        let eval = |d: f64| {
            let mut p = *z;
            p[i] += d;
            if !(0.0..=1.0).contains(&p[i]) {
                return None;
            }
            phi(&p)
        };
        g[i] = match (eval(h), eval(-h)) {
            (Some(up), Some(dn)) => (up - dn) / (2.0 * h),
            (Some(up), None) => (up - value) / h,
            (None, Some(dn)) => (value - dn) / h,
            (None, None) => 0.0,
        };
    }
    g
}

fn start_points(space: &DesignSpace, map: &BoxMap, count: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![[0.5; 4]];
    let mut attempts = 0;
    while points.len() < count && attempts < 1000 * count {
        attempts += 1;
        let z: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
        if section_of(&map.to_x(&z)).validate().is_ok() {
            points.push(z);
        }
    }
    // fall back to the centre if the box is nearly all invalid geometry
    while points.len() < count {
        points.push([0.5; 4]);
    }
    let _ = space;
    points
}

/// Multi-start augmented-Lagrangian solve.
pub fn solve(problem: &Problem, opts: &SolverOptions) -> Result<OptimizationResult> {
    problem.validate()?;
    let report = check_feasibility(problem)?;
    if !report.feasible {
        return Err(SpaError::Infeasible(report.certificate));
    }
    let cons = Constraints::new(problem)?;
    let map = BoxMap::new(&problem.space);
    let starts = start_points(&problem.space, &map, opts.starts.max(8), opts.seed);
    let outcomes: Vec<Option<StartOutcome>> = starts
        .par_iter()
        .map(|z0| run_start(&cons, &map, *z0, 1.0, opts))
        .collect();

    let mut best: Option<StartOutcome> = None;
    let mut total_iterations = 0;
    for outcome in outcomes.into_iter().flatten() {
        total_iterations += outcome.iterations;
        if outcome.violation > FEASIBILITY_TOL || !outcome.objective.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| outcome.objective > b.objective) {
            best = Some(outcome);
        }
    }
    let Some(best) = best else {
        return Err(SpaError::Infeasible(format!(
            "no start reached a feasible point ({})",
            cons.names().join(", ")
        )));
    };
    Ok(OptimizationResult {
        params: section_of(&best.x),
        objective: best.objective,
        iterations: total_iterations,
        active_constraints: cons.active(&best.x),
        feasible: true,
    })
}

fn grid_axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let mut axis: Vec<f64> = (0..count).map(|k| lo + k as f64 * step).collect();
    // close the axis on the upper face unless the step spans the whole interval
    if count > 1 && hi - axis[count - 1] > 1e-9 * step {
        axis.push(hi);
    }
    axis
}

/// Exhaustive search over a regular grid from the lower corner, with the
/// upper bound appended to each axis the step does not land on.
pub fn grid_oracle(problem: &Problem, step: f64) -> Result<OptimizationResult> {
    problem.validate()?;
    if !(step.is_finite() && step > 0.0) {
        return Err(SpaError::param("step", "must be positive"));
    }
    let s = &problem.space;
    let axes = [
        grid_axis(s.a_bounds.0, s.a_bounds.1, step),
        grid_axis(s.b_bounds.0, s.b_bounds.1, step),
        grid_axis(s.w_bounds.0, s.w_bounds.1, step),
        grid_axis(s.t_bounds.0, s.t_bounds.1, step),
    ];
    let points: u128 = axes.iter().map(|a| a.len() as u128).product();
    if points > GRID_LIMIT {
        return Err(SpaError::GridTooLarge {
            points,
            limit: GRID_LIMIT,
        });
    }
    let cons = Constraints::new(problem)?;
    // each a-slice returns its first best point; slices reduce in index order
    let slices: Vec<Option<([f64; 4], f64)>> = axes[0]
        .par_iter()
        .map(|&a| {
            let mut best: Option<([f64; 4], f64)> = None;
            for &b in &axes[1] {
                for &w in &axes[2] {
                    for &t in &axes[3] {
                        let x = [a, b, w, t];
                        if cons.violation(&x) > 0.0 {
                            continue;
                        }
                        let f = cons.objective(&x);
                        if f.is_finite() && best.is_none_or(|(_, bf)| f > bf) {
                            best = Some((x, f));
                        }
                    }
                }
            }
            best
        })
        .collect();
    let mut best: Option<([f64; 4], f64)> = None;
    for (x, f) in slices.into_iter().flatten() {
        if best.is_none_or(|(_, bf)| f > bf) {
            best = Some((x, f));
        }
    }
    let Some((x, objective)) = best else {
        return Err(SpaError::Infeasible(format!(
            "no grid point at step {:.4} mm satisfies {}",
            step * 1e3,
            cons.names().join(", ")
        )));
    };
    Ok(OptimizationResult {
        params: section_of(&x),
        objective,
        iterations: points as usize,
        active_constraints: cons.active(&x),
        feasible: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub witness: Option<CrossSection>,
    /// Names the binding constraints when infeasible; summarizes the check otherwise.
    pub certificate: String,
}

/// Decides whether the box, height band and frequency band admit a valid
/// section. Infeasibility is certified from monotone bounds on
/// `E·w·(a+b)^(n+2)` (and on the wall mass when no mass range is given).
pub fn check_feasibility(problem: &Problem) -> Result<FeasibilityReport> {
    let s = &problem.space;
    if let Err(SpaError::Infeasible(msg)) = s.validate() {
        return Ok(FeasibilityReport {
            feasible: false,
            witness: None,
            certificate: format!("h_min/h_max: {msg}"),
        });
    }
    problem.validate()?;
    let (h_min, h_max) = s.height_range();
    let e = problem.material.youngs_modulus;
    let n = problem.material.exponent;
    let stiff = |w: f64, h: f64| e * w * h.powf(n + 2.0);
    let (s_min, s_max) = (stiff(s.w_bounds.0, h_min), stiff(s.w_bounds.1, h_max));

    let cons = Constraints::new(problem)?;
    match cons.frequency {
        Some(FrequencyConstraint::Stiffness { c1, c2 }) => {
            if s_max < c1 {
                return Ok(FeasibilityReport {
                    feasible: false,
                    witness: None,
                    certificate: format!(
                        "frequency_min: box maximum of E·w·h^(n+2) = {s_max:.4e} is below C1 = {c1:.4e}"
                    ),
                });
            }
            if s_min > c2 {
                return Ok(FeasibilityReport {
                    feasible: false,
                    witness: None,
                    certificate: format!(
                        "frequency_max: box minimum of E·w·h^(n+2) = {s_min:.4e} is above C2 = {c2:.4e}"
                    ),
                });
            }
        }
        Some(FrequencyConstraint::OwnMass { lo, hi }) => {
            // wall area grows in every coordinate, so its extremes sit at the box corners
            let mass_at = |x: [f64; 4]| {
                let cs = section_of(&x);
                problem.material.density
                    * problem.length
                    * (cs.a * cs.width + cs.width * cs.wall_thickness
                        + 2.0 * cs.b * cs.wall_thickness
                        - 2.0 * cs.wall_thickness * cs.wall_thickness)
            };
            let m_min = mass_at(s.lower());
            let m_max = mass_at(s.upper());
            let omega_max = (s_max / dynamics::stiffness_for_frequency(1.0, m_min, problem.length, n))
                .sqrt();
            let omega_min = (s_min / dynamics::stiffness_for_frequency(1.0, m_max, problem.length, n))
                .sqrt();
            if omega_max < lo {
                return Ok(FeasibilityReport {
                    feasible: false,
                    witness: None,
                    certificate: format!(
                        "frequency_min: natural frequency is at most {omega_max:.4} rad/s, below {lo}"
                    ),
                });
            }
            if omega_min > hi {
                return Ok(FeasibilityReport {
                    feasible: false,
                    witness: None,
                    certificate: format!(
                        "frequency_max: natural frequency is at least {omega_min:.4} rad/s, above {hi}"
                    ),
                });
            }
        }
        None => {}
    }

    let map = BoxMap::new(s);
    let opts = SolverOptions::default();
    for z0 in start_points(s, &map, 8, 0) {
        if let Some(outcome) = run_start(&cons, &map, z0, 0.0, &opts) {
            if outcome.violation <= FEASIBILITY_TOL {
                return Ok(FeasibilityReport {
                    feasible: true,
                    witness: Some(section_of(&outcome.x)),
                    certificate: "witness satisfies every constraint".into(),
                });
            }
        }
    }
    // the bounds admit a solution but no witness was located
    let certificate = match cons.frequency {
        Some(FrequencyConstraint::Stiffness { .. }) | None => {
            "monotone bounds admit a solution; witness search did not converge".to_string()
        }
        Some(FrequencyConstraint::OwnMass { .. }) => {
            return Ok(FeasibilityReport {
                feasible: false,
                witness: None,
                certificate: "frequency_min/frequency_max: no section found inside the band".into(),
            })
        }
    };
    Ok(FeasibilityReport {
        feasible: true,
        witness: None,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn replica_material() -> Material {
        Material {
            exponent: 2.0,
            density: 1721.3,
            ..Material::default()
        }
    }

    fn problem(space: DesignSpace) -> Problem {
        Problem::new(space, replica_material(), 0.094, 0.15e6)
    }

    #[test]
    fn evaluate_matches_objective_and_rejects_invalid() {
        let m = replica_material();
        let cs = CrossSection::from_mm(4.0, 20.0, 30.0, 1.5).unwrap();
        let f = evaluate(&cs, &m, 0.094, 0.15e6, &Normalizers::default());
        assert!((f - 2.36).abs() / 2.36 < 0.05);
        assert_eq!(evaluate(&cs, &m, 0.094, 0.0, &Normalizers::default()), 0.0);
        let bad = CrossSection {
            a: 1e-3,
            ..cs
        };
        assert_eq!(
            evaluate(&bad, &m, 0.094, 0.15e6, &Normalizers::default()),
            f64::NEG_INFINITY
        );
        let narrow = CrossSection::from_mm(4.0, 20.0, 28.0, 1.5).unwrap();
        assert!(evaluate(&narrow, &m, 0.094, 0.15e6, &Normalizers::default()) < f);
    }

    #[test]
    fn single_point_grid() {
        let p = problem(DesignSpace::default());
        let r = grid_oracle(&p, 1.0).unwrap();
        let (a, b, w, t) = (r.params.a, r.params.b, r.params.width, r.params.wall_thickness);
        assert!(a >= 2e-3 && b >= 14e-3 && w >= 10e-3 && t >= 1.5e-3);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.params.to_mm(), [2.0, 14.0, 10.0, 1.5]);
    }

    #[test]
    fn grid_guard() {
        let p = problem(DesignSpace::default());
        assert!(matches!(
            grid_oracle(&p, 1e-5),
            Err(SpaError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn prose_box_solve_agrees_with_grid() {
        let p = problem(DesignSpace::default());
        let solved = solve(&p, &SolverOptions::default()).unwrap();
        let grid = grid_oracle(&p, 0.25e-3).unwrap();
        let ds = solved.params.to_mm();
        let dg = grid.params.to_mm();
        for i in 0..4 {
            assert!((ds[i] - dg[i]).abs() <= 0.25 + 1e-6, "{ds:?} vs {dg:?}");
        }
        assert!(solved.objective >= grid.objective - 1e-9);
        assert!(solved.active_constraints.iter().any(|c| c == "w_max"));
        assert_eq!(solved.params.width, 30e-3);
    }

    #[test]
    fn solve_is_deterministic() {
        let p = problem(DesignSpace::default());
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_band_is_always_feasible() {
        let report = check_feasibility(&problem(DesignSpace::default())).unwrap();
        assert!(report.feasible);
        assert!(report.witness.is_some());
    }

    #[test]
    fn band_above_box_is_infeasible() {
        let space = DesignSpace {
            frequency_band: Some((40.0, 50.0)),
            mass_bounds: Some((0.03, 0.04)),
            ..DesignSpace::default()
        };
        let p = problem(space);
        let report = check_feasibility(&p).unwrap();
        assert!(!report.feasible);
        assert!(report.certificate.starts_with("frequency_min"));
        assert!(matches!(solve(&p, &SolverOptions::default()), Err(SpaError::Infeasible(_))));
        assert!(matches!(grid_oracle(&p, 0.5e-3), Err(SpaError::Infeasible(_))));
    }

    #[test]
    fn band_below_box_is_infeasible() {
        let space = DesignSpace {
            frequency_band: Some((0.01, 0.02)),
            mass_bounds: Some((0.03, 0.04)),
            ..DesignSpace::default()
        };
        let report = check_feasibility(&problem(space)).unwrap();
        assert!(!report.feasible);
        assert!(report.certificate.starts_with("frequency_max"));
    }

    #[test]
    fn empty_height_band_is_infeasible() {
        let space = DesignSpace {
            h_bounds: (40e-3, 45e-3),
            ..DesignSpace::default()
        };
        let p = problem(space);
        assert!(!check_feasibility(&p).unwrap().feasible);
        assert!(matches!(solve(&p, &SolverOptions::default()), Err(SpaError::Infeasible(_))));
    }

    #[test]
    fn band_moves_height_down() {
        let m = 0.35 / 9.81;
        let mut heights = Vec::new();
        for band in [(2.4, 2.6), (2.2, 2.4), (1.6, 1.8)] {
            let space = DesignSpace {
                frequency_band: Some(band),
                mass_bounds: Some((m, m)),
                ..DesignSpace::default()
            };
            let r = solve(&problem(space), &SolverOptions::default()).unwrap();
            assert!(r.active_constraints.iter().any(|c| c == "frequency_max"));
            heights.push(r.params.height());
        }
        assert!(heights[0] > heights[1] && heights[1] > heights[2], "{heights:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn oracle_agreement_on_sub_boxes(
            a0 in 2.0f64..4.0, da in 0.5f64..1.0,
            b0 in 14.0f64..21.0, db in 1.0f64..3.0,
            w0 in 10.0f64..27.0, dw in 1.0f64..3.0,
            t0 in 1.5f64..2.0, dt in 0.25f64..1.0,
        ) {
            let space = DesignSpace {
                a_bounds: (a0 * 1e-3, (a0 + da) * 1e-3),
                b_bounds: (b0 * 1e-3, (b0 + db) * 1e-3),
                w_bounds: (w0 * 1e-3, (w0 + dw) * 1e-3),
                t_bounds: (t0 * 1e-3, (t0 + dt) * 1e-3),
                ..DesignSpace::default()
            };
            let p = problem(space);
            let step = 0.25e-3;
            match (solve(&p, &SolverOptions::default()), grid_oracle(&p, step)) {
                (Ok(s), Ok(g)) => {
                    let (xs, xg) = (s.params.to_mm(), g.params.to_mm());
                    for i in 0..4 {
                        prop_assert!((xs[i] - xg[i]).abs() <= 0.25 + 1e-6, "{:?} vs {:?}", xs, xg);
                    }
                    prop_assert!(s.objective >= g.objective * (1.0 - 1e-9), "{} vs {}", s.objective, g.objective);
                    let oblique = s.active_constraints.iter().any(|c| c == "h_min" || c == "h_max");
                    if oblique {
                        // the a + b face cuts across grid cells; the grid must still beat
                        // the cell corner just below the solver's point
                        let lo = [a0, b0, w0, t0];
                        let snapped: Vec<f64> = (0..4)
                            .map(|i| lo[i] + ((xs[i] - lo[i]) / 0.25 + 1e-9).floor() * 0.25)
                            .collect();
                        let cs = CrossSection::from_mm(snapped[0], snapped[1], snapped[2], snapped[3]).unwrap();
                        let f = evaluate(&cs, &p.material, p.length, p.pressure, &p.normalizers);
                        prop_assert!(g.objective >= f - 1e-12, "{} vs corner {} {:?}", g.objective, f, snapped);
                    } else {
                        prop_assert!(
                            (s.objective - g.objective).abs() / g.objective < 5e-3,
                            "{} {:?} vs {} {:?}", s.objective, xs, g.objective, xg
                        );
                    }
                }
                (Err(_), Err(_)) => {}
                (s, g) => prop_assert!(false, "solve {:?} vs grid {:?}", s.is_ok(), g.is_ok()),
            }
        }
    }
}
