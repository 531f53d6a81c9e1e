//! Nonlinear second-order bending dynamics.
//!
//! `θ̈ + 2ζω_n·θ̇ + ω_n²·θⁿ = F/M`, with the equivalent spring constant of the
//! large-deflection cantilever and the natural frequency derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpaError};
use crate::geometry::{self, ActuatorDesign, CrossSection};

/// Parameters of the compact second-order model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicModel {
    /// rad/s
    pub natural_frequency: f64,
    pub damping_ratio: f64,
    pub exponent: f64,
    /// kg
    pub mass: f64,
    /// Angular acceleration per unit applied force (1/kg).
    pub force_gain: f64,
}

impl DynamicModel {
    pub fn new(natural_frequency: f64, damping_ratio: f64, exponent: f64, mass: f64) -> Result<Self> {
        let model = Self {
            natural_frequency,
            damping_ratio,
            exponent,
            mass,
            force_gain: 1.0 / mass,
        };
        model.validate()?;
        Ok(model)
    }

    /// Builds the model of `design` using the material damping ratio.
    pub fn from_design(design: &ActuatorDesign) -> Result<Self> {
        let mass = geometry::mass(design)?;
        Self::new(
            natural_frequency(design)?,
            design.material.damping_ratio,
            design.material.exponent,
            mass,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.natural_frequency.is_finite() && self.natural_frequency > 0.0) {
            return Err(SpaError::param("natural_frequency", "must be positive"));
        }
        if !(self.damping_ratio > 0.0 && self.damping_ratio < 1.0) {
            return Err(SpaError::param("damping_ratio", "must lie in (0, 1)"));
        }
        if !(self.exponent.is_finite() && self.exponent >= 1.0) {
            return Err(SpaError::param("exponent", "must be >= 1"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(SpaError::param("mass", "must be positive"));
        }
        if !self.force_gain.is_finite() {
            return Err(SpaError::param("force_gain", "must be finite"));
        }
        Ok(())
    }

    /// Equilibrium angle under a constant force, `(gain·F/ω_n²)^(1/n)`.
    pub fn equilibrium_angle(&self, force: f64) -> f64 {
        signed_pow(
            self.force_gain * force / (self.natural_frequency * self.natural_frequency),
            1.0 / self.exponent,
        )
    }

    fn acceleration(&self, angle: f64, velocity: f64, force: f64) -> f64 {
        let w = self.natural_frequency;
        self.force_gain * force
            - 2.0 * self.damping_ratio * w * velocity
            - w * w * signed_pow(angle, self.exponent)
    }
}

/// Uniformly sampled response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub times: Vec<f64>,
    pub angles: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl StepTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sample spacing, checked to be uniform.
    pub fn step(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(SpaError::param("trace", "needs at least two samples"));
        }
        if self.angles.len() != self.times.len() || self.velocities.len() != self.times.len() {
            return Err(SpaError::param("trace", "column lengths differ"));
        }
        let dt = self.times[1] - self.times[0];
        if dt <= 0.0 {
            return Err(SpaError::param("trace", "times must increase"));
        }
        for pair in self.times.windows(2) {
            if ((pair[1] - pair[0]) - dt).abs() > 1e-6 * dt.max(1e-9) + 1e-12 {
                return Err(SpaError::param("trace", "times are not uniformly spaced"));
            }
        }
        Ok(dt)
    }
}

/// Input force history.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Constant(f64),
    /// Zero-order-hold samples with spacing `dt`; the last value is held.
    Series { dt: f64, values: Vec<f64> },
}

impl Forcing {
    pub fn at(&self, time: f64) -> f64 {
        match self {
            Forcing::Constant(f) => *f,
            Forcing::Series { dt, values } => {
                if values.is_empty() {
                    return 0.0;
                }
                let index = ((time / dt).floor().max(0.0) as usize).min(values.len() - 1);
                values[index]
            }
        }
    }
}

pub(crate) fn signed_pow(x: f64, exponent: f64) -> f64 {
    if exponent == 1.0 {
        x
    } else {
        x.signum() * x.abs().powf(exponent)
    }
}

/// One classical Runge–Kutta step of `ẋ = f(t, x)`.
pub(crate) fn rk4_step<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    x: &[f64; N],
    h: f64,
) -> [f64; N] {
    let shift = |base: &[f64; N], k: &[f64; N], s: f64| {
        let mut out = *base;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += s * ki;
        }
        out
    };
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &shift(x, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &shift(x, &k2, 0.5 * h));
    let k4 = f(t + h, &shift(x, &k3, h));
    let mut out = *x;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Equivalent spring constant `((n+1)/n)ⁿ · E·I_n / L_iⁿ⁺¹`.
pub fn spring_constant(design: &ActuatorDesign) -> Result<f64> {
    design.validate()?;
    let n = design.material.exponent;
    if design.length <= 0.0 {
        return Err(SpaError::param("length", "must be positive"));
    }
    let inertia = geometry::moment_of_inertia(&design.section, n)?;
    Ok(((n + 1.0) / n).powf(n) * design.material.youngs_modulus * inertia
        / design.length.powf(n + 1.0))
}

/// Undamped natural frequency `sqrt(K / M)` (rad/s).
pub fn natural_frequency(design: &ActuatorDesign) -> Result<f64> {
    let k = spring_constant(design)?;
    let m = geometry::mass(design)?;
    if !(m > 0.0) {
        return Err(SpaError::param("mass", "must be positive"));
    }
    Ok((k / m).sqrt())
}

/// `E·w·(a+b)^(n+2)`, the section stiffness measure the frequency band constrains.
pub fn stiffness_measure(cs: &CrossSection, youngs_modulus: f64, exponent: f64) -> f64 {
    youngs_modulus * cs.width * cs.height().powf(exponent + 2.0)
}

/// Value of `E·w·(a+b)^(n+2)` that gives natural frequency `omega` at mass `mass`.
pub fn stiffness_for_frequency(omega: f64, mass: f64, length: f64, exponent: f64) -> f64 {
    let n = exponent;
    (n / (n + 1.0)).powf(n) * 2f64.powf(n + 1.0) * (n + 2.0) * mass * omega * omega
        * length.powf(n + 1.0)
}

/// Bounds `(C1, C2)` on `E·w·(a+b)^(n+2)` for a natural-frequency band and a
/// mass range.
pub fn frequency_constraint_bounds(
    omega_lo: f64,
    omega_hi: f64,
    mass_lo: f64,
    mass_hi: f64,
    length: f64,
    exponent: f64,
) -> Result<(f64, f64)> {
    if !(omega_lo > 0.0 && omega_lo <= omega_hi) {
        return Err(SpaError::param(
            "frequency_band",
            format!("need 0 < lo <= hi, got [{omega_lo}, {omega_hi}]"),
        ));
    }
    if !(mass_lo > 0.0 && mass_lo <= mass_hi) {
        return Err(SpaError::param(
            "mass_bounds",
            format!("need 0 < lo <= hi, got [{mass_lo}, {mass_hi}]"),
        ));
    }
    if !(length > 0.0) {
        return Err(SpaError::param("length", "must be positive"));
    }
    if !(exponent >= 1.0) {
        return Err(SpaError::param("exponent", "must be >= 1"));
    }
    Ok((
        stiffness_for_frequency(omega_lo, mass_lo, length, exponent),
        stiffness_for_frequency(omega_hi, mass_hi, length, exponent),
    ))
}

/// Default guard on `|θ|` (rad) used by [`simulate_open_loop`].
pub const DEFAULT_DIVERGENCE_GUARD: f64 = 1e6;

/// Integrates the model from rest with fixed-step RK4.
pub fn simulate_open_loop(
    model: &DynamicModel,
    forcing: &Forcing,
    dt: f64,
    duration: f64,
) -> Result<StepTrace> {
    simulate_open_loop_guarded(model, forcing, dt, duration, DEFAULT_DIVERGENCE_GUARD)
}

pub fn simulate_open_loop_guarded(
    model: &DynamicModel,
    forcing: &Forcing,
    dt: f64,
    duration: f64,
    guard: f64,
) -> Result<StepTrace> {
    model.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SpaError::param("dt", "must be positive"));
    }
    if !(duration >= dt) {
        return Err(SpaError::param("duration", "must be at least one step"));
    }
    let steps = (duration / dt).round() as usize;
    let mut trace = StepTrace {
        times: Vec::with_capacity(steps + 1),
        angles: Vec::with_capacity(steps + 1),
        velocities: Vec::with_capacity(steps + 1),
    };
    let mut state = [0.0, 0.0];
    trace.times.push(0.0);
    trace.angles.push(0.0);
    trace.velocities.push(0.0);
    for k in 0..steps {
        let t = k as f64 * dt;
        // hold the input over the step so series forcing behaves as ZOH
        let force = forcing.at(t);
        state = rk4_step(
            |_, x: &[f64; 2]| [x[1], model.acceleration(x[0], x[1], force)],
            t,
            &state,
            dt,
        );
        let magnitude = state[0].abs().max(state[1].abs());
        if !magnitude.is_finite() || state[0].abs() > guard {
            return Err(SpaError::Divergence {
                time: t + dt,
                magnitude,
            });
        }
        trace.times.push((k + 1) as f64 * dt);
        trace.angles.push(state[0]);
        trace.velocities.push(state[1]);
    }
    Ok(trace)
}

/// Unit-amplitude step response of `K·ω²/(s² + 2ζωs + ω²)`.
pub fn linear_step_response(gain: f64, omega: f64, zeta: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let decay = zeta * omega;
    let shape = if (zeta - 1.0).abs() < 1e-7 {
        1.0 - (-omega * t).exp() * (1.0 + omega * t)
    } else if zeta < 1.0 {
        let wd = omega * (1.0 - zeta * zeta).sqrt();
        1.0 - (-decay * t).exp()
            * ((wd * t).cos() + zeta / (1.0 - zeta * zeta).sqrt() * (wd * t).sin())
    } else {
        let root = omega * (zeta * zeta - 1.0).sqrt();
        let (s1, s2) = (-decay + root, -decay - root);
        1.0 + (s2 * (s1 * t).exp() - s1 * (s2 * t).exp()) / (s1 - s2)
    };
    gain * shape
}

/// Result of fitting a linear second-order step response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub natural_frequency: f64,
    pub damping_ratio: f64,
    /// Steady-state angle per unit step amplitude.
    pub static_gain: f64,
    /// RMS fit residual relative to the steady-state angle.
    pub residual: f64,
    pub iterations: usize,
}

/// Fits `(ω_n, ζ)` to a step response by Levenberg–Marquardt, seeded from the
/// overshoot and peak time.
pub fn identify_second_order(trace: &StepTrace, step_amplitude: f64) -> Result<Identification> {
    if trace.len() < 10 {
        return Err(SpaError::Identification {
            reason: format!("need at least 10 samples, got {}", trace.len()),
            residual: f64::NAN,
        });
    }
    trace.step()?;
    if step_amplitude == 0.0 || !step_amplitude.is_finite() {
        return Err(SpaError::param("step_amplitude", "must be non-zero"));
    }
    let (t, y) = (&trace.times, &trace.angles);
    let t0 = t[0];
    let y0 = y[0];
    let shifted: Vec<f64> = y.iter().map(|v| v - y0).collect();
    let tail = (shifted.len() / 10).max(1);
    let settled = shifted[shifted.len() - tail..].iter().sum::<f64>() / tail as f64;
    let span = shifted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if span < 1e-12 || settled.abs() < 1e-12 {
        return Err(SpaError::Identification {
            reason: "trace carries no step response".into(),
            residual: span,
        });
    }

    let seed = seed_parameters(t, &shifted, settled, t0);
    let fit = levenberg_marquardt(t, &shifted, t0, seed)?;
    let [gain, omega, zeta] = fit.params;
    let residual = fit.rms / gain.abs();
    if !(omega > 0.0 && zeta > 0.0) || residual > 0.05 {
        return Err(SpaError::Identification {
            reason: format!("fit did not converge (omega {omega:.4}, zeta {zeta:.4})"),
            residual,
        });
    }
    Ok(Identification {
        natural_frequency: omega,
        damping_ratio: zeta,
        static_gain: gain / step_amplitude,
        residual,
        iterations: fit.iterations,
    })
}

fn seed_parameters(t: &[f64], y: &[f64], settled: f64, t0: f64) -> [f64; 3] {
    let sign = settled.signum();
    let (peak_idx, peak) = y
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v * sign))
        .fold((0, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
    let level = settled.abs();
    let overshoot = (peak - level) / level;
    if overshoot > 5e-4 && peak_idx + 1 < y.len() {
        // log-decrement relation between overshoot and damping
        let log_os = overshoot.ln();
        let zeta = -log_os / (std::f64::consts::PI.powi(2) + log_os * log_os).sqrt();
        let tp = t[peak_idx] - t0;
        let wd = std::f64::consts::PI / tp.max(1e-9);
        [settled, wd / (1.0 - zeta * zeta).sqrt(), zeta]
    } else {
        let half = y
            .iter()
            .position(|v| v * sign >= 0.5 * level)
            .map(|i| t[i] - t0)
            .unwrap_or(t[t.len() - 1] - t0);
        let zeta = 0.9;
        [settled, (1.0 + 0.7 * zeta) / half.max(1e-9), zeta]
    }
}

struct Fit {
    params: [f64; 3],
    rms: f64,
    iterations: usize,
}

fn residuals(t: &[f64], y: &[f64], t0: f64, p: &[f64; 3]) -> Vec<f64> {
    t.iter()
        .zip(y)
        .map(|(ti, yi)| linear_step_response(p[0], p[1], p[2], ti - t0) - yi)
        .collect()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn levenberg_marquardt(t: &[f64], y: &[f64], t0: f64, seed: [f64; 3]) -> Result<Fit> {
    use nalgebra::{Matrix3, Vector3};

    let mut p = seed;
    let mut r = residuals(t, y, t0, &p);
    let mut cost = sum_sq(&r);
    let mut lambda: f64 = 1e-3;
    let mut iterations = 0;
    for iter in 0..500 {
        iterations = iter + 1;
        // central-difference Jacobian
        let mut jac = vec![[0.0; 3]; t.len()];
        for k in 0..3 {
            let h = 1e-7 * p[k].abs().max(1e-6);
            let (mut up, mut dn) = (p, p);
            up[k] += h;
            dn[k] -= h;
            let ru = residuals(t, y, t0, &up);
            let rd = residuals(t, y, t0, &dn);
            for (row, (a, b)) in jac.iter_mut().zip(ru.iter().zip(&rd)) {
                row[k] = (a - b) / (2.0 * h);
            }
        }
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (row, ri) in jac.iter().zip(&r) {
            for i in 0..3 {
                jtr[i] += row[i] * ri;
                for j in 0..3 {
                    jtj[(i, j)] += row[i] * row[j];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = [p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]];
            trial[1] = trial[1].max(1e-6);
            trial[2] = trial[2].max(1e-4);
            let rt = residuals(t, y, t0, &trial);
            let trial_cost = sum_sq(&rt);
            if trial_cost.is_finite() && trial_cost < cost {
                let step = (0..3)
                    .map(|i| (trial[i] - p[i]).abs() / p[i].abs().max(1e-12))
                    .fold(0.0, f64::max);
                let gain = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                r = rt;
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if step < 1e-12 || gain < 1e-15 {
                    return Ok(Fit {
                        params: p,
                        rms: (cost / t.len() as f64).sqrt(),
                        iterations,
                    });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(Fit {
        params: p,
        rms: (cost / t.len() as f64).sqrt(),
        iterations,
    })
}

/// Power-law fit `σ = c·εⁿ` to stress–strain samples; returns `(c, n)`.
///
/// Seeds from a log-log regression, then refines in the original (linear)
/// residuals with Gauss–Newton.
pub fn fit_stress_strain(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let usable: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(e, s)| *e > 0.0 && *s > 0.0 && e.is_finite() && s.is_finite())
        .collect();
    if usable.len() < 2 {
        return Err(SpaError::param(
            "stress_strain",
            "need at least two samples with positive strain and stress",
        ));
    }
    let m = usable.len() as f64;
    let (sx, sy) = usable
        .iter()
        .fold((0.0, 0.0), |(ax, ay), (e, s)| (ax + e.ln(), ay + s.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (e, s) in &usable {
        let dx = e.ln() - mx;
        sxx += dx * dx;
        sxy += dx * (s.ln() - my);
    }
    if sxx <= 0.0 {
        return Err(SpaError::param("stress_strain", "strain values are all equal"));
    }
    let mut n = sxy / sxx;
    let mut c = (my - n * mx).exp();
    for _ in 0..50 {
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (e, s) in &usable {
            let model = c * e.powf(n);
            let r = model - s;
            let dc = e.powf(n);
            let dn = model * e.ln();
            a11 += dc * dc;
            a12 += dc * dn;
            a22 += dn * dn;
            g1 += dc * r;
            g2 += dn * r;
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() < 1e-300 {
            break;
        }
        let step_c = (a22 * g1 - a12 * g2) / det;
        let step_n = (a11 * g2 - a12 * g1) / det;
        c -= step_c;
        n -= step_n;
        if step_c.abs() < 1e-14 * c.abs() && step_n.abs() < 1e-14 {
            break;
        }
    }
    if !(c.is_finite() && n.is_finite()) {
        return Err(SpaError::param("stress_strain", "fit diverged"));
    }
    Ok((c, n))
}
