//! Pump-driven third-order plant, LQR synthesis and sampled closed-loop
//! simulation.
//!
//! The plant is `θ/ω_m = g / (s·(s² + 2ζω_n·s + ω_n²))` with motor speed `ω_m`
//! (rev/s) as input and the pump gain `g` kept as an explicit scalar. The LQR
//! gain is synthesized on the unit-gain companion form, so the physical
//! command is `ω_m = −K·(x − x_ref)/g`.

use nalgebra::{Complex, DMatrix, Matrix3, RowVector3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::rk4_step;
use crate::error::{Result, SpaError};

/// Syringe pump driving the chamber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpModel {
    /// m²
    pub syringe_area: f64,
    /// Pneumatic capacity (m³/Pa).
    pub capacity: f64,
    /// Pressure-to-angular-acceleration constant `c`.
    pub motor_gain_const: f64,
    /// Lead-screw travel per revolution (m/rev).
    pub lead: f64,
    /// rev/s
    pub motor_speed_limit: f64,
}

impl Default for PumpModel {
    fn default() -> Self {
        Self {
            syringe_area: 5.6e-4,
            capacity: 1e-9,
            motor_gain_const: 2.0e-3,
            lead: 2e-3,
            motor_speed_limit: 5.0,
        }
    }
}

impl PumpModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("syringe_area", self.syringe_area),
            ("capacity", self.capacity),
            ("motor_gain_const", self.motor_gain_const),
            ("lead", self.lead),
            ("motor_speed_limit", self.motor_speed_limit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SpaError::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Input gain `l·A_s·c / (2π·C_s·M)` from motor speed to `θ'''`.
    pub fn plant_gain(&self, mass: f64) -> f64 {
        self.lead * self.syringe_area * self.motor_gain_const
            / (2.0 * std::f64::consts::PI * self.capacity * mass)
    }
}

/// Companion-form plant with state `[θ, θ̇, θ̈]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpace {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub c: RowVector3<f64>,
    pub plant_gain: f64,
    pub natural_frequency: f64,
    pub damping_ratio: f64,
}

fn companion(omega: f64, zeta: f64) -> Matrix3<f64> {
    Matrix3::new(
        0.0, 1.0, 0.0,
        0.0, 0.0, 1.0,
        0.0, -omega * omega, -2.0 * zeta * omega,
    )
}

pub fn build_state_space(omega_n: f64, zeta: f64, pump: &PumpModel, mass: f64) -> Result<StateSpace> {
    if !(omega_n.is_finite() && omega_n > 0.0) {
        return Err(SpaError::param("natural_frequency", "must be positive"));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(SpaError::param("damping_ratio", "must lie in (0, 1)"));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(SpaError::param("mass", "must be positive"));
    }
    pump.validate()?;
    Ok(StateSpace {
        a: companion(omega_n, zeta),
        b: Vector3::new(0.0, 0.0, 1.0),
        c: RowVector3::new(1.0, 0.0, 0.0),
        plant_gain: pump.plant_gain(mass),
        natural_frequency: omega_n,
        damping_ratio: zeta,
    })
}

impl StateSpace {
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        sorted(self.a.complex_eigenvalues().iter().copied().collect())
    }

    pub fn controllability_matrix(&self) -> Matrix3<f64> {
        let ab = self.a * self.b;
        Matrix3::from_columns(&[self.b, ab, self.a * ab])
    }
}

fn sorted(mut values: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
    values.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));
    values
}

/// LQR weights and the resulting Riccati solution and gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrDesign {
    pub q: Matrix3<f64>,
    pub r: f64,
    pub p: f64,
    pub y: Matrix3<f64>,
    pub gain: RowVector3<f64>,
}

/// State weight `p·diag(1, 0.3, 0)`.
pub fn state_weight(p: f64) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(p, 0.3 * p, 0.0))
}

impl LqrDesign {
    pub fn synthesize(ss: &StateSpace, p: f64, r: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 0.0) {
            return Err(SpaError::param("p", "must be non-negative"));
        }
        let q = state_weight(p);
        let y = solve_riccati(ss, &q, r)?;
        let gain = lqr_gain(&y, ss, r)?;
        Ok(Self { q, r, p, y, gain })
    }

    pub fn closed_loop_matrix(&self, ss: &StateSpace) -> Matrix3<f64> {
        ss.a - ss.b * self.gain
    }

    pub fn closed_loop_poles(&self, ss: &StateSpace) -> Vec<Complex<f64>> {
        sorted(self.closed_loop_matrix(ss).complex_eigenvalues().iter().copied().collect())
    }
}

/// Stabilizing solution of `AᵀY + YA − Y·B·R⁻¹·Bᵀ·Y + Q = 0`.
pub fn solve_riccati(ss: &StateSpace, q: &Matrix3<f64>, r: f64) -> Result<Matrix3<f64>> {
    if ss.controllability_matrix().rank(1e-12) < 3 {
        return Err(SpaError::Synthesis("(A, B) is not controllable".into()));
    }
    let a = DMatrix::from_column_slice(3, 3, ss.a.as_slice());
    let b = DMatrix::from_column_slice(3, 1, ss.b.as_slice());
    let qd = DMatrix::from_column_slice(3, 3, q.as_slice());
    let rd = DMatrix::from_element(1, 1, r);
    let y = care(&a, &b, &qd, &rd)?;
    Ok(Matrix3::from_column_slice(y.as_slice()))
}

/// Continuous algebraic Riccati solver for any size: matrix-sign iteration on
/// the Hamiltonian, then Newton–Kleinman refinement.
pub fn care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.nrows() != b.ncols() || !r.is_square() {
        return Err(SpaError::Synthesis("inconsistent matrix dimensions".into()));
    }
    if (q - q.transpose()).norm() > 1e-12 * q.norm().max(1.0) {
        return Err(SpaError::Synthesis("Q must be symmetric".into()));
    }
    if q.symmetric_eigenvalues().iter().any(|&l| l < -1e-12 * q.norm().max(1.0)) {
        return Err(SpaError::Synthesis("Q must be positive semidefinite".into()));
    }
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| SpaError::Synthesis("R must be positive definite".into()))?;
    let r_inv = r_chol.inverse();
    let s = b * &r_inv * b.transpose();

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let scale = h.norm().max(1.0);
    let eigs = h.complex_eigenvalues();
    if let Some(min) = eigs.iter().map(|l| l.re.abs()).reduce(f64::min) {
        if min < 1e-9 * scale {
            return Err(SpaError::Marginal(format!(
                "Hamiltonian eigenvalue with |Re| = {min:.2e} on the imaginary axis"
            )));
        }
    }

    let mut z = h.clone();
    let dim = 2 * n;
    for _ in 0..100 {
        let lu = z.clone().lu();
        let det = lu.determinant();
        let z_inv = lu
            .try_inverse()
            .ok_or_else(|| SpaError::Marginal("Hamiltonian sign iteration hit a singular iterate".into()))?;
        let c = det.abs().powf(-1.0 / dim as f64);
        let c = if c.is_finite() && c > 0.0 { c } else { 1.0 };
        let next = (&z * c + &z_inv / c) * 0.5;
        let change = (&next - &z).norm() / next.norm();
        z = next;
        if change < 1e-13 {
            break;
        }
    }
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let id = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(&w22 + &id));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(&w11 + &id)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-&w21));
    let mut y = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| SpaError::Synthesis(format!("stable subspace solve failed: {e}")))?;
    y = (&y + y.transpose()) * 0.5;

    // Newton–Kleinman polishing
    let q_scale = q.norm().max(f64::MIN_POSITIVE);
    for _ in 0..20 {
        let k = &r_inv * b.transpose() * &y;
        let acl = a - b * &k;
        let rhs = q + k.transpose() * r * &k;
        let next = solve_lyapunov(&acl, &rhs)?;
        let next = (&next + next.transpose()) * 0.5;
        let change = (&next - &y).norm();
        y = next;
        if change <= 1e-15 * y.norm().max(q_scale) {
            break;
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SpaError::Synthesis("Riccati solution is not finite".into()));
    }
    Ok(y)
}

/// Solves `AᵀX + XA + M = 0` through the Kronecker form.
fn solve_lyapunov(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = id.kronecker(&at) + at.kronecker(&id);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-m).as_slice());
    let x = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SpaError::Synthesis("closed loop has eigenvalues summing to zero".into()))?;
    Ok(DMatrix::from_column_slice(n, n, x.as_slice()))
}

/// `‖AᵀY + YA − YBR⁻¹BᵀY + Q‖_F / ‖Q‖_F`.
pub fn riccati_residual(ss: &StateSpace, q: &Matrix3<f64>, r: f64, y: &Matrix3<f64>) -> f64 {
    let res = ss.a.transpose() * y + y * ss.a - y * ss.b * ss.b.transpose() * y / r + q;
    res.norm() / q.norm().max(f64::MIN_POSITIVE)
}

/// `K = R⁻¹·Bᵀ·Y`, checked to make `A − B·K` Hurwitz.
pub fn lqr_gain(y: &Matrix3<f64>, ss: &StateSpace, r: f64) -> Result<RowVector3<f64>> {
    if !(r.is_finite() && r > 0.0) {
        return Err(SpaError::param("r", "must be positive"));
    }
    let gain = ss.b.transpose() * y / r;
    let acl = ss.a - ss.b * gain;
    let worst = acl
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(worst < 0.0) {
        return Err(SpaError::Synthesis(format!(
            "closed loop is not Hurwitz (max Re = {worst:.3e})"
        )));
    }
    Ok(gain)
}

/// True iff `Y ≻ 0` and `Aclᵀ·Y + Y·Acl ≺ 0`.
pub fn lyapunov_check(y: &Matrix3<f64>, closed_loop: &Matrix3<f64>) -> bool {
    const TOL: f64 = 1e-10;
    let sym = (y + y.transpose()) * 0.5;
    if sym.symmetric_eigenvalues().iter().any(|&l| l <= TOL) {
        return false;
    }
    let derivative = closed_loop.transpose() * sym + sym * closed_loop;
    let derivative = (derivative + derivative.transpose()) * 0.5;
    derivative.symmetric_eigenvalues().iter().all(|&l| l < -TOL)
}

/// How the controller observes the plant state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Measurement {
    Exact,
    /// Angle samples only; rates from backward differences through a
    /// first-order filter with time constant `filter_tau` (s).
    FiniteDifference { filter_tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopSettings {
    /// rad
    pub reference: f64,
    /// Controller sample period (s).
    pub dt: f64,
    /// s
    pub duration: f64,
    /// rev/s
    pub saturation: f64,
    /// Added to the plant damping ratio in simulation only.
    pub zeta_offset: f64,
    pub measurement: Measurement,
}

impl Default for ClosedLoopSettings {
    fn default() -> Self {
        Self {
            reference: std::f64::consts::FRAC_PI_2,
            dt: 0.025,
            duration: 10.0,
            saturation: 5.0,
            zeta_offset: 0.0,
            measurement: Measurement::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopTrace {
    pub times: Vec<f64>,
    pub reference: Vec<f64>,
    pub angle: Vec<f64>,
    /// Motor command after saturation (rev/s).
    pub command: Vec<f64>,
    /// First time after which the angle stays inside ±2% of the reference.
    pub settling_time: Option<f64>,
    pub steady_state_error: f64,
}

/// Sampled, saturated step response. The command is held between samples and
/// the plant is integrated with RK4 at `dt/10`.
pub fn simulate_closed_loop(
    ss: &StateSpace,
    gain: &RowVector3<f64>,
    settings: &ClosedLoopSettings,
) -> Result<ClosedLoopTrace> {
    let ClosedLoopSettings {
        reference,
        dt,
        duration,
        saturation,
        zeta_offset,
        measurement,
    } = *settings;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SpaError::param("dt", "must be positive"));
    }
    if !(duration >= dt) {
        return Err(SpaError::param("duration", "must cover at least one sample"));
    }
    if !(saturation > 0.0) {
        return Err(SpaError::param("saturation", "must be positive"));
    }
    if !reference.is_finite() {
        return Err(SpaError::param("reference", "must be finite"));
    }
    let plant_zeta = ss.damping_ratio + zeta_offset;
    if !(plant_zeta > 0.0) {
        return Err(SpaError::param("zeta_offset", "plant damping ratio must stay positive"));
    }
    if let Measurement::FiniteDifference { filter_tau } = measurement {
        if !(filter_tau >= 0.0) {
            return Err(SpaError::param("filter_tau", "must be non-negative"));
        }
    }
    let plant = companion(ss.natural_frequency, plant_zeta);
    let g = ss.plant_gain;
    let inner = 10;
    let h = dt / inner as f64;
    let samples = (duration / dt).round() as usize;
    let guard = 1e3 * reference.abs().max(1.0);

    let mut x = [0.0; 3];
    let mut est = [0.0; 3];
    let mut prev_angle = 0.0;
    let mut trace = ClosedLoopTrace {
        times: Vec::with_capacity(samples + 1),
        reference: Vec::with_capacity(samples + 1),
        angle: Vec::with_capacity(samples + 1),
        command: Vec::with_capacity(samples + 1),
        settling_time: None,
        steady_state_error: 0.0,
    };
    for k in 0..=samples {
        let t = k as f64 * dt;
        let observed = match measurement {
            Measurement::Exact => x,
            Measurement::FiniteDifference { filter_tau } => {
                let alpha = dt / (filter_tau + dt);
                let raw_rate = if k == 0 { 0.0 } else { (x[0] - prev_angle) / dt };
                let rate = est[1] + alpha * (raw_rate - est[1]);
                let raw_acc = if k == 0 { 0.0 } else { (rate - est[1]) / dt };
                let acc = est[2] + alpha * (raw_acc - est[2]);
                prev_angle = x[0];
                est = [x[0], rate, acc];
                est
            }
        };
        let error = Vector3::new(observed[0] - reference, observed[1], observed[2]);
        let command = (-(gain * error)[0] / g).clamp(-saturation, saturation);
        trace.times.push(t);
        trace.reference.push(reference);
        trace.angle.push(x[0]);
        trace.command.push(command);
        if k == samples {
            break;
        }
        for j in 0..inner {
            x = rk4_step(
                |_, s: &[f64; 3]| {
                    let v = plant * Vector3::new(s[0], s[1], s[2]);
                    [v[0], v[1], v[2] + g * command]
                },
                t + j as f64 * h,
                &x,
                h,
            );
        }
        let magnitude = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !magnitude.is_finite() || x[0].abs() > guard {
            return Err(SpaError::Divergence {
                time: t + dt,
                magnitude,
            });
        }
    }
    let band = 0.02 * reference.abs();
    let last_outside = trace
        .angle
        .iter()
        .rposition(|a| (a - reference).abs() > band);
    trace.settling_time = match last_outside {
        None => Some(0.0),
        Some(i) if i + 1 < trace.times.len() => Some(trace.times[i + 1]),
        Some(_) => None,
    };
    trace.steady_state_error = reference - trace.angle[trace.angle.len() - 1];
    Ok(trace)
}

/// 2% settling time predicted by the slowest closed-loop pole.
pub fn dominant_pole_settling(poles: &[Complex<f64>]) -> Option<f64> {
    let slowest = poles.iter().map(|p| -p.re).fold(f64::INFINITY, f64::min);
    (slowest > 0.0).then(|| 50f64.ln() / slowest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const MASS: f64 = 0.35 / 9.81;

    fn paper_plant() -> StateSpace {
        build_state_space(2.86, 0.7, &PumpModel::default(), MASS).unwrap()
    }

    #[test]
    fn companion_eigenvalues() {
        let ss = paper_plant();
        let e = ss.eigenvalues();
        assert!(e[0].norm() < 1e-12);
        assert_relative_eq!(e[1].re, -2.002, epsilon = 1e-3);
        assert_relative_eq!(e[1].im.abs(), 2.0428, epsilon = 1e-3);
        let ss = build_state_space(1.0, 0.6, &PumpModel::default(), MASS).unwrap();
        let e = ss.eigenvalues();
        assert_relative_eq!(e[1].re, -0.6, epsilon = 1e-12);
        assert_relative_eq!(e[1].im.abs(), 0.8, epsilon = 1e-12);
        assert!(ss.controllability_matrix().determinant().abs() > 0.5);
    }

    #[test]
    fn pump_gain_near_ten() {
        let g = PumpModel::default().plant_gain(MASS);
        assert!((g - 10.0).abs() < 0.05, "{g}");
        assert!(build_state_space(2.86, 1.2, &PumpModel::default(), MASS).is_err());
    }

    #[test]
    fn scalar_care() {
        for q in [0.5, 4.0, 100.0] {
            let y = care(
                &DMatrix::zeros(1, 1),
                &DMatrix::from_element(1, 1, 1.0),
                &DMatrix::from_element(1, 1, q),
                &DMatrix::from_element(1, 1, 1.0),
            )
            .unwrap();
            assert_relative_eq!(y[(0, 0)], q.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn paper_design_is_stabilizing() {
        let ss = paper_plant();
        let lqr = LqrDesign::synthesize(&ss, 100.0, 1.0).unwrap();
        assert!(riccati_residual(&ss, &lqr.q, 1.0, &lqr.y) < 1e-8);
        assert_relative_eq!(lqr.gain[0], 10.0, max_relative = 1e-9);
        assert!(lyapunov_check(&lqr.y, &lqr.closed_loop_matrix(&ss)));
        for p in lqr.closed_loop_poles(&ss) {
            assert!(p.re <= -1.0, "{p}");
        }
        assert_eq!(lqr.gain * Vector3::zeros(), RowVector3::<f64>::zeros().columns(0, 1));
    }

    #[test]
    fn cheaper_control_moves_slowest_pole_left() {
        let ss = paper_plant();
        let slowest = |p: f64| {
            LqrDesign::synthesize(&ss, p, 1.0)
                .unwrap()
                .closed_loop_poles(&ss)
                .iter()
                .map(|l| l.re)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        assert!(slowest(400.0) < slowest(100.0));
    }

    #[test]
    fn zero_weight_is_marginal() {
        let ss = paper_plant();
        assert!(matches!(
            LqrDesign::synthesize(&ss, 0.0, 1.0),
            Err(SpaError::Marginal(_))
        ));
    }

    #[test]
    fn lyapunov_check_rejects() {
        let unstable = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        assert!(!lyapunov_check(&Matrix3::identity(), &unstable));
        let indefinite = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(!lyapunov_check(&indefinite, &(-Matrix3::identity())));
        assert!(lyapunov_check(&Matrix3::identity(), &(-Matrix3::identity())));
    }

    #[test]
    fn zero_reference_gives_zero_trace() {
        let ss = paper_plant();
        let lqr = LqrDesign::synthesize(&ss, 100.0, 1.0).unwrap();
        let settings = ClosedLoopSettings {
            reference: 0.0,
            duration: 2.0,
            ..ClosedLoopSettings::default()
        };
        let trace = simulate_closed_loop(&ss, &lqr.gain, &settings).unwrap();
        assert!(trace.angle.iter().all(|a| *a == 0.0));
        assert!(trace.command.iter().all(|u| *u == 0.0));
        assert_eq!(trace.settling_time, Some(0.0));
    }

    #[test]
    fn saturation_holds_and_step_settles() {
        let ss = paper_plant();
        let lqr = LqrDesign::synthesize(&ss, 100.0, 1.0).unwrap();
        let trace = simulate_closed_loop(&ss, &lqr.gain, &ClosedLoopSettings::default()).unwrap();
        assert!(trace.command.iter().all(|u| u.abs() <= 5.0));
        assert!(trace.settling_time.is_some());
        assert!(trace.steady_state_error.abs() < 0.01 * std::f64::consts::FRAC_PI_2);
        let tight = ClosedLoopSettings {
            saturation: 0.5,
            duration: 20.0,
            ..ClosedLoopSettings::default()
        };
        let trace = simulate_closed_loop(&ss, &lqr.gain, &tight).unwrap();
        assert!(trace.command.iter().any(|u| u.abs() == 0.5));
        assert!(trace.command.iter().all(|u| u.abs() <= 0.5));
        assert!(trace.settling_time.is_some());
    }

    #[test]
    fn linear_regime_matches_dominant_pole() {
        let ss = paper_plant();
        let lqr = LqrDesign::synthesize(&ss, 100.0, 1.0).unwrap();
        let settings = ClosedLoopSettings {
            reference: 1e-3,
            saturation: 1e9,
            dt: 0.001,
            ..ClosedLoopSettings::default()
        };
        let trace = simulate_closed_loop(&ss, &lqr.gain, &settings).unwrap();
        let predicted = dominant_pole_settling(&lqr.closed_loop_poles(&ss)).unwrap();
        let measured = trace.settling_time.unwrap();
        assert!((measured - predicted).abs() / predicted < 0.15, "{measured} vs {predicted}");
    }

    #[test]
    fn finite_difference_measurement_stays_stable() {
        let ss = paper_plant();
        let lqr = LqrDesign::synthesize(&ss, 100.0, 1.0).unwrap();
        let settings = ClosedLoopSettings {
            measurement: Measurement::FiniteDifference { filter_tau: 0.01 },
            duration: 15.0,
            ..ClosedLoopSettings::default()
        };
        let trace = simulate_closed_loop(&ss, &lqr.gain, &settings).unwrap();
        assert!(trace.steady_state_error.abs() < 0.02);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eigenvalues_match_characteristic_roots(omega in 0.5f64..6.0, zeta in 0.05f64..0.95) {
            let ss = build_state_space(omega, zeta, &PumpModel::default(), MASS).unwrap();
            let e = ss.eigenvalues();
            prop_assert!(e[0].norm() < 1e-10);
            prop_assert!((e[1].re + zeta * omega).abs() < 1e-10);
            prop_assert!((e[1].im.abs() - omega * (1.0 - zeta * zeta).sqrt()).abs() < 1e-10);
        }

        #[test]
        fn random_syntheses_are_stable(omega in 1.0f64..5.0, zeta in 0.5f64..0.9, p in 10.0f64..1000.0) {
            let ss = build_state_space(omega, zeta, &PumpModel::default(), MASS).unwrap();
            let lqr = LqrDesign::synthesize(&ss, p, 1.0).unwrap();
            prop_assert!(riccati_residual(&ss, &lqr.q, 1.0, &lqr.y) < 1e-8);
            prop_assert!(lyapunov_check(&lqr.y, &lqr.closed_loop_matrix(&ss)));
        }

        #[test]
        fn command_never_exceeds_limit(reference in -3.0f64..3.0, limit in 0.5f64..10.0) {
            let ss = paper_plant();
            let lqr = LqrDesign::synthesize(&ss, 100.0, 1.0).unwrap();
            let settings = ClosedLoopSettings {
                reference,
                saturation: limit,
                duration: 3.0,
                ..ClosedLoopSettings::default()
            };
            let trace = simulate_closed_loop(&ss, &lqr.gain, &settings).unwrap();
            prop_assert!(trace.command.iter().all(|u| u.abs() <= limit));
        }
    }
}
