use std::process::ExitCode;

use vbll_core::ErrorKind;

/// A failed command: one diagnostic line and its exit-code category.
#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Numerical,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Io => 2,
            ErrorKind::Numerical => 3,
        })
    }
}

impl From<vbll_core::Error> for CliError {
    fn from(e: vbll_core::Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}
