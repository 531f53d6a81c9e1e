use spa_core::SpaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Stdout closed by the reader, e.g. `| head`.
    #[error("output closed")]
    Closed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Closed => 0,
        }
    }
}

impl From<SpaError> for CliError {
    fn from(e: SpaError) -> Self {
        match e {
            SpaError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            SpaError::Dimension { .. }
            | SpaError::Parameter { .. }
            | SpaError::Geometry(_)
            | SpaError::GridTooLarge { .. } => CliError::Config(e.to_string()),
            SpaError::ReverseBending { .. }
            | SpaError::Divergence { .. }
            | SpaError::Identification { .. }
            | SpaError::Synthesis(_)
            | SpaError::Marginal(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::Closed;
        }
        CliError::Usage(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv: {e}"))
    }
}
