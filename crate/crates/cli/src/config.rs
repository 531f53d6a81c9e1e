//! Run configuration: one TOML file, units carried in key names.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spa_core::control::{ClosedLoopSettings, PumpModel};
use spa_core::geometry::{ActuatorDesign, CrossSection, Material};
use spa_core::kinematics::Normalizers;
use spa_core::optimizer::{DesignSpace, Problem};
use spa_core::SpaError;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub actuator: ActuatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlConfig>,
    #[serde(default)]
    pub sim: SimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub a_mm: f64,
    pub b_mm: f64,
    pub w_mm: f64,
    pub t_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    #[serde(rename = "E_MPa")]
    pub e_mpa: f64,
    pub n: f64,
    pub density_kg_m3: f64,
    pub zeta: f64,
    pub zeta_perturb: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let m = Material::default();
        Self {
            e_mpa: m.youngs_modulus * 1e-6,
            n: m.exponent,
            density_kg_m3: m.density,
            zeta: m.damping_ratio,
            zeta_perturb: m.damping_perturbation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorConfig {
    pub length_mm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_override_kg: Option<f64>,
}

impl Default for ActuatorConfig {
    fn default() -> Self {
        Self {
            length_mm: 94.0,
            mass_override_kg: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    #[serde(rename = "pressure_MPa")]
    pub pressure_mpa: f64,
    #[serde(rename = "torque_norm_Nm")]
    pub torque_norm_nm: f64,
    pub angle_norm_rad: f64,
    pub a_mm: [f64; 2],
    pub b_mm: [f64; 2],
    pub h_mm: [f64; 2],
    pub w_mm: [f64; 2],
    pub t_mm: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_band_rad_s: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_bounds_kg: Option<[f64; 2]>,
    pub grid_step_mm: f64,
    pub starts: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        let s = DesignSpace::default();
        let n = Normalizers::default();
        let mm = |(lo, hi): (f64, f64)| [lo * 1e3, hi * 1e3];
        Self {
            pressure_mpa: 0.15,
            torque_norm_nm: n.torque,
            angle_norm_rad: n.angle,
            a_mm: mm(s.a_bounds),
            b_mm: mm(s.b_bounds),
            h_mm: mm(s.h_bounds),
            w_mm: mm(s.w_bounds),
            t_mm: mm(s.t_bounds),
            frequency_band_rad_s: None,
            mass_bounds_kg: None,
            grid_step_mm: 0.25,
            starts: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub p: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub dt_ms: f64,
    pub saturation_revps: f64,
    pub reference_deg: f64,
    pub duration_s: f64,
    /// Plant natural frequency; the model estimate is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub natural_frequency_rad_s: Option<f64>,
    pub syringe_area_mm2: f64,
    #[serde(rename = "capacity_mm3_per_kPa")]
    pub capacity_mm3_per_kpa: f64,
    pub motor_gain_const: f64,
    pub lead_mm_per_rev: f64,
    /// `none` or `finite_difference`.
    pub measurement: String,
    pub filter_tau_ms: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        let pump = PumpModel::default();
        let loop_defaults = ClosedLoopSettings::default();
        Self {
            p: 100.0,
            r: 1.0,
            dt_ms: loop_defaults.dt * 1e3,
            saturation_revps: pump.motor_speed_limit,
            reference_deg: 90.0,
            duration_s: loop_defaults.duration,
            natural_frequency_rad_s: None,
            syringe_area_mm2: pump.syringe_area * 1e6,
            capacity_mm3_per_kpa: pump.capacity * 1e9 * 1e3,
            motor_gain_const: pump.motor_gain_const,
            lead_mm_per_rev: pump.lead * 1e3,
            measurement: "none".into(),
            filter_tau_ms: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt_ms: f64,
    pub duration_s: f64,
    #[serde(rename = "pressure_max_MPa")]
    pub pressure_max_mpa: f64,
    pub pressure_points: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_ms: 1.0,
            duration_s: 10.0,
            pressure_max_mpa: 0.25,
            pressure_points: 26,
        }
    }
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {reason}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn interval(key: &str, [lo, hi]: [f64; 2]) -> Result<(), CliError> {
    positive(key, lo)?;
    if !(hi.is_finite() && lo <= hi) {
        return Err(invalid(key, format!("need lo <= hi, got [{lo}, {hi}]")));
    }
    Ok(())
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_str(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_str(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn to_toml(config: &RunConfig) -> String {
    toml::to_string(config).expect("configuration serializes")
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.section()?;
        let m = &self.material;
        positive("material.E_MPa", m.e_mpa)?;
        if !(m.n.is_finite() && m.n >= 1.0) {
            return Err(invalid("material.n", format!("must be >= 1, got {}", m.n)));
        }
        positive("material.density_kg_m3", m.density_kg_m3)?;
        if !(m.zeta > 0.0 && m.zeta < 1.0) {
            return Err(invalid("material.zeta", format!("must lie in (0, 1), got {}", m.zeta)));
        }
        if !(m.zeta_perturb >= 0.0 && m.zeta - m.zeta_perturb > 0.0) {
            return Err(invalid(
                "material.zeta_perturb",
                format!("must be non-negative and below zeta, got {}", m.zeta_perturb),
            ));
        }
        positive("actuator.length_mm", self.actuator.length_mm)?;
        if let Some(mass) = self.actuator.mass_override_kg {
            positive("actuator.mass_override_kg", mass)?;
        }
        if let Some(o) = &self.optimize {
            if !(o.pressure_mpa.is_finite() && o.pressure_mpa >= 0.0) {
                return Err(invalid("optimize.pressure_MPa", "must be non-negative"));
            }
            positive("optimize.torque_norm_Nm", o.torque_norm_nm)?;
            positive("optimize.angle_norm_rad", o.angle_norm_rad)?;
            interval("optimize.a_mm", o.a_mm)?;
            interval("optimize.b_mm", o.b_mm)?;
            interval("optimize.h_mm", o.h_mm)?;
            interval("optimize.w_mm", o.w_mm)?;
            interval("optimize.t_mm", o.t_mm)?;
            if let Some(band) = o.frequency_band_rad_s {
                interval("optimize.frequency_band_rad_s", band)?;
            }
            if let Some(mass) = o.mass_bounds_kg {
                interval("optimize.mass_bounds_kg", mass)?;
            }
            positive("optimize.grid_step_mm", o.grid_step_mm)?;
            if o.starts == 0 {
                return Err(invalid("optimize.starts", "must be at least 1"));
            }
        }
        if let Some(c) = &self.control {
            if !(c.p.is_finite() && c.p >= 0.0) {
                return Err(invalid("control.p", "must be non-negative"));
            }
            positive("control.R", c.r)?;
            positive("control.dt_ms", c.dt_ms)?;
            positive("control.saturation_revps", c.saturation_revps)?;
            if !c.reference_deg.is_finite() {
                return Err(invalid("control.reference_deg", "must be finite"));
            }
            positive("control.duration_s", c.duration_s)?;
            if c.duration_s * 1e3 < c.dt_ms {
                return Err(invalid("control.duration_s", "must cover at least one sample"));
            }
            if let Some(w) = c.natural_frequency_rad_s {
                positive("control.natural_frequency_rad_s", w)?;
            }
            positive("control.syringe_area_mm2", c.syringe_area_mm2)?;
            positive("control.capacity_mm3_per_kPa", c.capacity_mm3_per_kpa)?;
            positive("control.motor_gain_const", c.motor_gain_const)?;
            positive("control.lead_mm_per_rev", c.lead_mm_per_rev)?;
            match c.measurement.as_str() {
                "none" => {}
                "finite_difference" => {
                    if !(c.filter_tau_ms >= 0.0) {
                        return Err(invalid("control.filter_tau_ms", "must be non-negative"));
                    }
                }
                other => {
                    return Err(invalid(
                        "control.measurement",
                        format!("expected `none` or `finite_difference`, got `{other}`"),
                    ))
                }
            }
        }
        positive("sim.dt_ms", self.sim.dt_ms)?;
        positive("sim.duration_s", self.sim.duration_s)?;
        if !(self.sim.pressure_max_mpa.is_finite() && self.sim.pressure_max_mpa >= 0.0) {
            return Err(invalid("sim.pressure_max_MPa", "must be non-negative"));
        }
        if self.sim.pressure_points == 0 {
            return Err(invalid("sim.pressure_points", "must be at least 1"));
        }
        Ok(())
    }

    pub fn section(&self) -> Result<CrossSection, CliError> {
        let g = &self.geometry;
        CrossSection::from_mm(g.a_mm, g.b_mm, g.w_mm, g.t_mm).map_err(|e| match e {
            SpaError::Dimension { field, reason } => {
                let key = match field {
                    "a" => "geometry.a_mm",
                    "b" => "geometry.b_mm",
                    "width" => "geometry.w_mm",
                    _ => "geometry.t_mm",
                };
                invalid(key, reason)
            }
            other => CliError::Config(other.to_string()),
        })
    }

    pub fn material(&self) -> Material {
        let m = &self.material;
        Material {
            youngs_modulus: m.e_mpa * 1e6,
            exponent: m.n,
            density: m.density_kg_m3,
            damping_ratio: m.zeta,
            damping_perturbation: m.zeta_perturb,
        }
    }

    pub fn length(&self) -> f64 {
        self.actuator.length_mm * 1e-3
    }

    pub fn design(&self) -> Result<ActuatorDesign, CliError> {
        let mut design = ActuatorDesign::new(self.section()?, self.material(), self.length())?;
        design.mass_override = self.actuator.mass_override_kg;
        Ok(design)
    }

    pub fn optimize_or_default(&self) -> OptimizeConfig {
        self.optimize.clone().unwrap_or_default()
    }

    pub fn control_or_default(&self) -> ControlConfig {
        self.control.clone().unwrap_or_default()
    }

    pub fn normalizers(&self) -> Normalizers {
        let o = self.optimize_or_default();
        Normalizers {
            torque: o.torque_norm_nm,
            angle: o.angle_norm_rad,
        }
    }

    pub fn problem(&self) -> Problem {
        let o = self.optimize_or_default();
        let m = |[lo, hi]: [f64; 2]| (lo * 1e-3, hi * 1e-3);
        let space = DesignSpace {
            a_bounds: m(o.a_mm),
            b_bounds: m(o.b_mm),
            h_bounds: m(o.h_mm),
            w_bounds: m(o.w_mm),
            t_bounds: m(o.t_mm),
            frequency_band: o.frequency_band_rad_s.map(|[lo, hi]| (lo, hi)),
            mass_bounds: o.mass_bounds_kg.map(|[lo, hi]| (lo, hi)),
        };
        Problem {
            space,
            material: self.material(),
            length: self.length(),
            pressure: o.pressure_mpa * 1e6,
            normalizers: self.normalizers(),
        }
    }

    pub fn pump(&self) -> PumpModel {
        let c = self.control_or_default();
        PumpModel {
            syringe_area: c.syringe_area_mm2 * 1e-6,
            capacity: c.capacity_mm3_per_kpa * 1e-9 * 1e-3,
            motor_gain_const: c.motor_gain_const,
            lead: c.lead_mm_per_rev * 1e-3,
            motor_speed_limit: c.saturation_revps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[geometry]\na_mm = 4.0\nb_mm = 20.0\nw_mm = 30.0\nt_mm = 1.5\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_str(MINIMAL).unwrap();
        assert_eq!(c.material, MaterialConfig::default());
        assert_eq!(c.actuator.length_mm, 94.0);
        let o = c.optimize_or_default();
        assert_eq!(o.pressure_mpa, 0.15);
        assert_eq!(o.torque_norm_nm, 0.4);
        assert!((o.angle_norm_rad - 1.4 * std::f64::consts::PI).abs() < 1e-15);
        let k = c.control_or_default();
        assert_eq!((k.p, k.r, k.dt_ms, k.saturation_revps), (100.0, 1.0, 25.0, 5.0));
        assert!((c.pump().capacity - 1e-9).abs() < 1e-24);
    }

    #[test]
    fn thin_solid_layer_names_its_key() {
        let text = MINIMAL.replace("a_mm = 4.0", "a_mm = 1.0");
        let err = parse_str(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("geometry.a_mm"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_str("[geometry]\na_mm = \n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_str(&format!("{MINIMAL}[material]\nE = 1.0\n")).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
    }

    #[test]
    fn nested_keys_are_reported() {
        let text = format!("{MINIMAL}[optimize]\nh_mm = [25.0, 15.0]\n");
        assert!(parse_str(&text).unwrap_err().to_string().contains("optimize.h_mm"));
        let text = format!("{MINIMAL}[control]\nmeasurement = \"kalman\"\n");
        assert!(parse_str(&text).unwrap_err().to_string().contains("control.measurement"));
    }

    #[test]
    fn full_config_round_trips() {
        let text = format!(
            "{MINIMAL}[material]\nE_MPa = 0.34\nn = 2.0\ndensity_kg_m3 = 1721.3\n\
             [actuator]\nlength_mm = 94.0\nmass_override_kg = 0.035677879714577\n\
             [optimize]\nfrequency_band_rad_s = [2.5, 3.5]\nmass_bounds_kg = [0.03, 0.04]\n\
             [control]\nnatural_frequency_rad_s = 2.86\n"
        );
        let c = parse_str(&text).unwrap();
        let again = parse_str(&to_toml(&c)).unwrap();
        assert_eq!(c, again);
    }
}
