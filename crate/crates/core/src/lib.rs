//! Design-optimization and control models for soft pneumatic actuators.
//!
//! The actuator is treated as a cantilever beam. [`kinematics`] maps chamber
//! pressure to torque and bending angle, [`dynamics`] gives the nonlinear
//! second-order model and its natural frequency, [`optimizer`] searches the
//! cross-section that maximizes the normalized torque-plus-angle objective
//! (optionally inside a natural-frequency band), and [`control`] synthesizes
//! and simulates an LQR loop around the pump-driven plant.

pub mod error;
pub mod geometry;
pub mod control;
pub mod dynamics;
pub mod kinematics;
pub mod optimizer;

pub use error::{Result, SpaError};
pub use geometry::{ActuatorDesign, CrossSection, Material};
pub use control::{ClosedLoopSettings, ClosedLoopTrace, LqrDesign, PumpModel, StateSpace};
pub use dynamics::{DynamicModel, Forcing, Identification, StepTrace};
pub use kinematics::{BendingResult, Normalizers, TorqueBreakdown};
pub use optimizer::{DesignSpace, OptimizationResult, Problem, SolverOptions};
