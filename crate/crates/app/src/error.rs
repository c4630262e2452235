use std::fmt;

use carcasswatch_core::Error as CoreError;

/// Process exit status of the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Internal = 1,
    Usage = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct AppError {
    pub status: ExitStatus,
    /// Pipeline stage that failed, such as `ingest` or `fit`.
    pub stage: Option<&'static str>,
    pub message: String,
}

impl AppError {
    pub fn usage(message: impl Into<String>) -> Self {
        AppError {
            status: ExitStatus::Usage,
            stage: None,
            message: message.into(),
        }
    }

    pub fn input(stage: &'static str, message: impl Into<String>) -> Self {
        AppError {
            status: ExitStatus::Usage,
            stage: Some(stage),
            message: message.into(),
        }
    }

    pub fn internal(stage: &'static str, message: impl Into<String>) -> Self {
        AppError {
            status: ExitStatus::Internal,
            stage: Some(stage),
            message: message.into(),
        }
    }

    /// Attribute a library error to `stage`; bad input maps to a usage status.
    pub fn stage(stage: &'static str) -> impl FnOnce(CoreError) -> AppError {
        move |e| {
            let status = if is_input_error(&e) {
                ExitStatus::Usage
            } else {
                ExitStatus::Internal
            };
            AppError {
                status,
                stage: Some(stage),
                message: e.to_string(),
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.status.code()
    }
}

pub fn is_input_error(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::Io { .. }
            | CoreError::Schema { .. }
            | CoreError::Range(_)
            | CoreError::Coding(_)
            | CoreError::Domain(_)
            | CoreError::Lookup(_)
            | CoreError::Artifact(_)
    )
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(stage) => write!(f, "{stage}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for AppError {}
