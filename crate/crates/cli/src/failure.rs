use sdm1::domain::DomainError;
use sdm1::ingest::IngestError;
use sdm1::model::{ModelError, ValidationError};
use sdm1::uncertainty::UncertaintyError;
use serde::Serialize;
use std::fmt;

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;

/// Error carrying its process exit code.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub kind: &'static str,
    pub exit_code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure { kind: "input", exit_code: EXIT_INPUT, message: message.into() }
    }

    pub fn convergence(message: impl Into<String>) -> Self {
        Failure { kind: "convergence", exit_code: EXIT_CONVERGENCE, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Failure { kind: "internal", exit_code: EXIT_INTERNAL, message: message.into() }
    }

    pub fn with_detail(mut self, detail: impl fmt::Display) -> Self {
        self.message = format!("{} ({detail})", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ValidationError> for Failure {
    fn from(e: ValidationError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<DomainError> for Failure {
    fn from(e: DomainError) -> Self {
        if e.is_convergence_failure() {
            Failure::convergence(e.to_string())
        } else {
            Failure::input(e.to_string())
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Validation(_) => Failure::input(e.to_string()),
            _ => Failure::convergence(e.to_string()),
        }
    }
}

impl From<UncertaintyError> for Failure {
    fn from(e: UncertaintyError) -> Self {
        match &e {
            UncertaintyError::Domain { source, .. } if source.is_convergence_failure() => {
                Failure::convergence(e.to_string())
            }
            _ => Failure::input(e.to_string()),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::SinkWriteFailure(_) => Failure::internal(e.to_string()),
            _ => Failure::input(e.to_string()),
        }
    }
}
