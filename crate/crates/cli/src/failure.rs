//! Error classes that decide the process exit code.

use std::fmt;

use wdmqkd_core::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    /// Bad or missing input; exit code 2.
    Config,
    /// The protocol ran but produced no usable key; exit code 3.
    Protocol,
    /// I/O and other failures; exit code 1.
    Other,
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self.class {
            Class::Config => 2,
            Class::Protocol => 3,
            Class::Other => 1,
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn config_err(msg: impl Into<String>) -> Failure {
    Failure {
        class: Class::Config,
        message: msg.into(),
    }
}

pub fn protocol_err(msg: impl Into<String>) -> Failure {
    Failure {
        class: Class::Protocol,
        message: msg.into(),
    }
}

pub fn io_err(context: &str, e: impl fmt::Display) -> Failure {
    Failure {
        class: Class::Other,
        message: format!("{context}: {e}"),
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let class = match e {
            CoreError::Config(_) | CoreError::Domain(_) | CoreError::Calibration(_) => {
                Class::Config
            }
            CoreError::UndefinedQber
            | CoreError::EstimationFailed(_)
            | CoreError::Abort(_)
            | CoreError::Infeasible(_) => Class::Protocol,
            CoreError::NotFound(_) => Class::Other,
        };
        Failure {
            class,
            message: e.to_string(),
        }
    }
}
