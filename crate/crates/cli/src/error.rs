use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments; nothing was simulated.
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<urllc_core::Error> for CliError {
    fn from(e: urllc_core::Error) -> Self {
        use urllc_core::Error as E;
        match e {
            E::Domain(_) | E::Usage(_) | E::Planning(_) | E::TraceLoad { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
