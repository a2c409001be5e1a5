use thiserror::Error;

/// Failures of the scenario runner, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Config or input that does not match the expected schema.
    #[error("{0}")]
    Schema(String),

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("divergence at t = {time} s ({detail})")]
    Divergence { time: f64, detail: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Synthesis(_) => 3,
            CliError::Divergence { .. } => 4,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        CliError::Schema(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// Maps a simulation error; argument errors there come from the config.
    pub fn from_sim(e: semiactive_core::Error) -> Self {
        use semiactive_core::Error as E;
        match e {
            E::IntegrationDivergence { time } => CliError::Divergence { time, detail: "plant state".into() },
            E::RuntimeDivergence { last_finite_time } => {
                CliError::Divergence { time: last_finite_time, detail: "H-infinity controller state".into() }
            }
            E::Argument(msg) => CliError::Schema(msg),
            other => CliError::Other(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
