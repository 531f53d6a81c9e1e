//! Cross-section and material parameterization.
//!
//! The section is a `width × (a + b)` rectangle split by the neutral surface.
//! The `a` side is a solid layer (it carries the strain-limiting sensor); the
//! `b` side holds the air chamber, which spans from the neutral surface to the
//! inner face of the outer wall and is bounded laterally by two side walls.
//! Every wall has thickness `wall_thickness`.
//!
//! All quantities are SI (m, Pa, kg).

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpaError};

/// Dimensional parameters of the actuator cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    /// Distance from the neutral surface to the solid-layer face (m).
    pub a: f64,
    /// Distance from the neutral surface to the chamber-side face (m).
    pub b: f64,
    pub width: f64,
    pub wall_thickness: f64,
}

impl CrossSection {
    pub fn new(a: f64, b: f64, width: f64, wall_thickness: f64) -> Result<Self> {
        let cs = Self {
            a,
            b,
            width,
            wall_thickness,
        };
        cs.validate()?;
        Ok(cs)
    }

    /// Builds a section from millimetre values.
    pub fn from_mm(a: f64, b: f64, width: f64, wall_thickness: f64) -> Result<Self> {
        Self::new(a * 1e-3, b * 1e-3, width * 1e-3, wall_thickness * 1e-3)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a", self.a),
            ("b", self.b),
            ("width", self.width),
            ("wall_thickness", self.wall_thickness),
        ];
        for (field, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(SpaError::Dimension {
                    field,
                    reason: format!("must be positive and finite, got {value}"),
                });
            }
        }
        let t = self.wall_thickness;
        if self.width <= 2.0 * t {
            return Err(SpaError::Dimension {
                field: "width",
                reason: format!("width {} must exceed twice the wall thickness {}", self.width, t),
            });
        }
        if self.a <= t {
            return Err(SpaError::Dimension {
                field: "a",
                reason: format!("a {} must exceed the wall thickness {}", self.a, t),
            });
        }
        if self.b <= t {
            return Err(SpaError::Dimension {
                field: "b",
                reason: format!("b {} must exceed the wall thickness {}", self.b, t),
            });
        }
        Ok(())
    }

    /// Overall section height `a + b`.
    pub fn height(&self) -> f64 {
        self.a + self.b
    }

    /// Width of the chamber between the side walls.
    pub fn chamber_width(&self) -> f64 {
        self.width - 2.0 * self.wall_thickness
    }

    /// Depth of the chamber measured from the neutral surface.
    pub fn chamber_depth(&self) -> f64 {
        self.b - self.wall_thickness
    }

    pub fn to_mm(&self) -> [f64; 4] {
        [
            self.a * 1e3,
            self.b * 1e3,
            self.width * 1e3,
            self.wall_thickness * 1e3,
        ]
    }
}

/// Elastomer properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Young's modulus (Pa).
    pub youngs_modulus: f64,
    /// Large-deflection exponent; `1.0` is linear beam theory.
    pub exponent: f64,
    /// Density (kg/m³).
    pub density: f64,
    pub damping_ratio: f64,
    /// Half-width of the damping-ratio uncertainty band.
    pub damping_perturbation: f64,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.youngs_modulus.is_finite() && self.youngs_modulus > 0.0) {
            return Err(SpaError::param("youngs_modulus", "must be positive"));
        }
        if !(self.exponent.is_finite() && self.exponent >= 1.0) {
            return Err(SpaError::param(
                "exponent",
                format!("must be >= 1, got {}", self.exponent),
            ));
        }
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(SpaError::param("density", "must be positive"));
        }
        if !(self.damping_ratio > 0.0 && self.damping_ratio < 1.0) {
            return Err(SpaError::param(
                "damping_ratio",
                format!("must lie in (0, 1), got {}", self.damping_ratio),
            ));
        }
        if !(self.damping_perturbation.is_finite() && self.damping_perturbation >= 0.0) {
            return Err(SpaError::param("damping_perturbation", "must be non-negative"));
        }
        Ok(())
    }
}

impl Default for Material {
    fn default() -> Self {
        Self {
            youngs_modulus: 0.34e6,
            exponent: 1.0,
            density: 1080.0,
            damping_ratio: 0.7,
            damping_perturbation: 0.1,
        }
    }
}

/// A complete actuator: section, material and initial length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorDesign {
    pub section: CrossSection,
    pub material: Material,
    /// Initial (unpressurized) length (m).
    pub length: f64,
    /// Measured mass (kg) that replaces the extruded-wall estimate.
    pub mass_override: Option<f64>,
}

impl ActuatorDesign {
    pub fn new(section: CrossSection, material: Material, length: f64) -> Result<Self> {
        let design = Self {
            section,
            material,
            length,
            mass_override: None,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn with_mass(mut self, mass: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(SpaError::param("mass_override", "must be positive"));
        }
        self.mass_override = Some(mass);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.section.validate()?;
        self.material.validate()?;
        if !(self.length.is_finite() && self.length >= 0.0) {
            return Err(SpaError::Dimension {
                field: "length",
                reason: format!("must be non-negative, got {}", self.length),
            });
        }
        Ok(())
    }
}

/// Chamber cross-sectional area `(w − 2t)(b − t)`.
pub fn chamber_area(cs: &CrossSection) -> Result<f64> {
    cs.validate()?;
    Ok(cs.chamber_width() * cs.chamber_depth())
}

/// Wall (elastomer) cross-sectional area: the full rectangle minus the chamber.
pub fn wall_area(cs: &CrossSection) -> Result<f64> {
    Ok(cs.width * cs.height() - chamber_area(cs)?)
}

/// Reaction pressure developed in the wall when the chamber is at `pressure`.
///
/// Axial force balance over the section: the chamber force `P·A_c` is carried
/// by the wall, so `P_w = P·(b − t)(w − 2t) / (a·w + w·t + 2·b·t − 2t²)`; the
/// denominator is the wall area.
pub fn wall_pressure(cs: &CrossSection, pressure: f64) -> Result<f64> {
    cs.validate()?;
    if !(pressure.is_finite() && pressure >= 0.0) {
        return Err(SpaError::param("pressure", "must be non-negative"));
    }
    let (a, b, w, t) = (cs.a, cs.b, cs.width, cs.wall_thickness);
    let denominator = a * w + w * t + 2.0 * b * t - 2.0 * t * t;
    if denominator <= 0.0 {
        return Err(SpaError::Geometry(format!(
            "wall-pressure denominator {denominator:e} is not positive"
        )));
    }
    Ok((b - t) * (w - 2.0 * t) / denominator * pressure)
}

/// Second moment of area of the large-deflection beam,
/// `(1/2)^(1+n) · w · h^(2+n) / (2+n)`.
pub fn moment_of_inertia(cs: &CrossSection, exponent: f64) -> Result<f64> {
    if !(exponent.is_finite() && exponent >= 1.0) {
        return Err(SpaError::param(
            "exponent",
            format!("must be >= 1, got {exponent}"),
        ));
    }
    Ok(moment_of_inertia_raw(cs.width, cs.height(), exponent))
}

pub(crate) fn moment_of_inertia_raw(width: f64, height: f64, exponent: f64) -> f64 {
    0.5_f64.powf(1.0 + exponent) / (2.0 + exponent) * width * height.powf(2.0 + exponent)
}

/// Mass of the actuator: the override if set, otherwise the wall area extruded
/// along the initial length.
pub fn mass(design: &ActuatorDesign) -> Result<f64> {
    if let Some(m) = design.mass_override {
        return Ok(m);
    }
    Ok(design.material.density * wall_area(&design.section)? * design.length)
}
