use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] wetting_core::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Process exit status: 2 for configuration errors, 3 for cap
    /// violations, 4 for numerical failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        use wetting_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Core(E::InvalidParameter(_)) => 2,
            CliError::Core(E::CapExceeded { .. }) => 3,
            CliError::Core(E::Convergence(_) | E::Numerical(_) | E::Hypothesis { .. } | E::InadmissibleFlip { .. }) => {
                4
            }
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
