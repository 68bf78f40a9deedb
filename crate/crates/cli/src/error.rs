use std::fmt;

use mlte::harness::HarnessError;
use mlte::{BindError, ContextError, EvidenceError, SpecError, StoreError};

/// Exit statuses. Anything else is a measured child's own status.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILED: u8 = 1;
    pub const INFRA: u8 = 2;
    pub const TIMEOUT: u8 = 124;
    pub const SPAWN: u8 = 126;
    pub const INTERRUPTED: u8 = 130;
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl fmt::Display) -> Self {
        CliError {
            code: exit::FAILED,
            message: message.to_string(),
        }
    }

    pub fn infra(message: impl fmt::Display) -> Self {
        CliError {
            code: exit::INFRA,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::infra(e)
    }
}

impl From<ContextError> for CliError {
    fn from(e: ContextError) -> Self {
        CliError::input(e)
    }
}

impl From<EvidenceError> for CliError {
    fn from(e: EvidenceError) -> Self {
        CliError::input(e)
    }
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::input(e)
    }
}

impl From<BindError> for CliError {
    fn from(e: BindError) -> Self {
        CliError::input(e)
    }
}

impl From<mlte::ArtifactError> for CliError {
    fn from(e: mlte::ArtifactError) -> Self {
        CliError::input(e)
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let code = match e {
            HarnessError::SpawnFailure { .. } => exit::SPAWN,
            HarnessError::Timeout { .. } => exit::TIMEOUT,
            HarnessError::Interrupted { .. } => exit::INTERRUPTED,
            HarnessError::Lost { .. } => exit::INFRA,
            _ => exit::FAILED,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}
