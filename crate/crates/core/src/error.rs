use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpaError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaError {
    /// A cross-section or design dimension violates its invariant.
    #[error("invalid dimension `{field}`: {reason}")]
    Dimension { field: &'static str, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    /// Net torque points against the chamber side; the section would bend backwards.
    #[error("section bends opposite to its design orientation (total torque {torque:.4e} N·m)")]
    ReverseBending { torque: f64 },

    #[error("integration diverged at t = {time:.4} s (|state| = {magnitude:.3e})")]
    Divergence { time: f64, magnitude: f64 },

    #[error("identification failed: {reason} (residual {residual:.3e})")]
    Identification { reason: String, residual: f64 },

    #[error("infeasible design space: {0}")]
    Infeasible(String),

    #[error("grid of {points} points exceeds the limit of {limit}; use a coarser step")]
    GridTooLarge { points: u128, limit: u128 },

    #[error("controller synthesis failed: {0}")]
    Synthesis(String),

    /// The Hamiltonian has eigenvalues on the imaginary axis, so no
    /// stabilizing Riccati solution exists (e.g. zero state weight on an
    /// integrating plant).
    #[error("closed loop is only marginally stable: {0}")]
    Marginal(String),
}

impl SpaError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        SpaError::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
