use std::process::ExitCode;

use lrfim::approx::ApproxError;
use lrfim::gadget::GadgetError;
use lrfim::reduction::{MisError, ReductionError};
use lrfim::verify::VerifyError;
use lrfim::{ModelError, SolveError};

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed files, arguments or instances: exit 2.
    BadInput(String),
    /// Exhaustive search refused by the spin-count guard: exit 3.
    Guard(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::BadInput(_) => ExitCode::from(2),
            CliError::Guard(_) => ExitCode::from(3),
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::BadInput(m) | CliError::Guard(m) => m,
        }
    }

    pub fn bad(message: impl Into<String>) -> Self {
        CliError::BadInput(message.into())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::GuardExceeded { .. } => CliError::Guard(e.to_string()),
            other => CliError::BadInput(other.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Solve(s) => s.into(),
            VerifyError::TooLarge { .. } => CliError::Guard(e.to_string()),
            other => CliError::BadInput(other.to_string()),
        }
    }
}

macro_rules! bad_input_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::BadInput(e.to_string())
            }
        })*
    };
}

bad_input_from!(ModelError, ApproxError, GadgetError, ReductionError, MisError, serde_json::Error);
