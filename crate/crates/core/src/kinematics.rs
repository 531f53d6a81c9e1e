//! Pressure-to-torque and pressure-to-bending models.
//!
//! The moment arm `y` is measured from the neutral surface and is positive
//! toward the chamber (`b`) side. The chamber pressure acts over the chamber
//! region; the wall reaction pressure acts over the wall region in the opposite
//! sense, so the wall term reduces the net torque when the wall's first moment
//! is positive.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpaError};
use crate::geometry::{self, ActuatorDesign, CrossSection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueBreakdown {
    /// Contribution of the chamber pressure (N·m).
    pub chamber: f64,
    /// Contribution of the wall reaction pressure (N·m).
    pub wall: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendingResult {
    /// Bending angle (rad).
    pub angle: f64,
    /// Axial elongation δL (m).
    pub elongation: f64,
    /// Elongated length L_i + δL (m).
    pub elongated_length: f64,
}

/// Normalization factors that put torque and angle on a common scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    /// N·m
    pub torque: f64,
    /// rad
    pub angle: f64,
}

impl Default for Normalizers {
    fn default() -> Self {
        Self {
            torque: 0.4,
            angle: 1.4 * std::f64::consts::PI,
        }
    }
}

/// First moment of the chamber region about the neutral surface (m³).
pub(crate) fn chamber_first_moment(cs: &CrossSection) -> f64 {
    let depth = cs.chamber_depth();
    cs.chamber_width() * depth * depth / 2.0
}

/// First moment of the wall region about the neutral surface (m³).
pub(crate) fn wall_first_moment(cs: &CrossSection) -> f64 {
    let full = cs.width * (cs.b * cs.b - cs.a * cs.a) / 2.0;
    full - chamber_first_moment(cs)
}

fn check_pressure(pressure: f64) -> Result<()> {
    if !(pressure.is_finite() && pressure >= 0.0) {
        return Err(SpaError::param(
            "pressure",
            format!("must be non-negative, got {pressure}"),
        ));
    }
    Ok(())
}

/// Torque generated by chamber pressure `pressure` (Pa).
pub fn torque(design: &ActuatorDesign, pressure: f64) -> Result<TorqueBreakdown> {
    section_torque(&design.section, pressure)
}

pub fn section_torque(cs: &CrossSection, pressure: f64) -> Result<TorqueBreakdown> {
    check_pressure(pressure)?;
    let wall_pressure = geometry::wall_pressure(cs, pressure)?;
    let chamber = pressure * chamber_first_moment(cs);
    let wall = -wall_pressure * wall_first_moment(cs);
    Ok(TorqueBreakdown {
        chamber,
        wall,
        total: chamber + wall,
    })
}

/// Large-deflection bending angle with the pressure-induced elongation:
/// `θ = n/(n+1) · (T/(E·I_n))^(1/n) · L_i · (1 + P·A_c/(A_w·E))`.
pub fn bending_angle(design: &ActuatorDesign, pressure: f64) -> Result<BendingResult> {
    let total = torque(design, pressure)?.total;
    bending_from_torque(design, pressure, total)
}

pub(crate) fn bending_from_torque(
    design: &ActuatorDesign,
    pressure: f64,
    total_torque: f64,
) -> Result<BendingResult> {
    if total_torque < 0.0 {
        return Err(SpaError::ReverseBending {
            torque: total_torque,
        });
    }
    let cs = &design.section;
    let e = design.material.youngs_modulus;
    let n = design.material.exponent;
    let inertia = geometry::moment_of_inertia(cs, n)?;
    let strain = pressure * geometry::chamber_area(cs)? / (geometry::wall_area(cs)? * e);
    let elongation = strain * design.length;
    let elongated_length = design.length + elongation;
    let angle = n / (n + 1.0) * (total_torque / (e * inertia)).powf(1.0 / n) * elongated_length;
    Ok(BendingResult {
        angle,
        elongation,
        elongated_length,
    })
}

/// `T/T_norm + θ/θ_norm` at pressure `pressure`.
pub fn normalized_objective(
    design: &ActuatorDesign,
    pressure: f64,
    normalizers: &Normalizers,
) -> Result<f64> {
    if !(normalizers.torque > 0.0 && normalizers.angle > 0.0) {
        return Err(SpaError::param("normalizers", "must be positive"));
    }
    let total = torque(design, pressure)?.total;
    let bend = bending_from_torque(design, pressure, total)?;
    Ok(total / normalizers.torque + bend.angle / normalizers.angle)
}

/// Torque from a force measured at the tip: `T_m = F_m · L_i`.
pub fn measured_torque(force: f64, length: f64) -> f64 {
    force * length
}
