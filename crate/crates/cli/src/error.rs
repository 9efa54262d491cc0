use serde::Serialize;
use thiserror::Error;

/// Exit status for malformed invocations (bad flags, config or values).
pub const EXIT_USAGE: i32 = 2;
/// Exit status for failures raised by the numerical core.
pub const EXIT_CORE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] sbl_core::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(sbl_core::Error::Io(e))
    }
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(_) => EXIT_CORE,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Core(e) => e.name(),
        }
    }

    /// The single-line JSON object written to stderr on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Payload<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&Payload {
            error: self.name(),
            message: self.to_string(),
        })
        .expect("error payload is always serializable")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
