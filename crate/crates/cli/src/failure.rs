use std::fmt;

use lzsweep_core::Error;

pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// A failed run: message for stderr plus the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn code_for(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_NUMERICAL,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = code_for(&e);
        let message = match &e {
            Error::Config { field, reason } => format!("{field}: {reason}"),
            other => other.to_string(),
        };
        Self { code, message }
    }
}

pub trait Within {
    /// Prefix a core error with the config block it came from.
    fn within(self, block: &str) -> Failure;
}

impl Within for Error {
    fn within(self, block: &str) -> Failure {
        let code = code_for(&self);
        let message = match &self {
            Error::Config { field, reason } => format!("{block}.{field}: {reason}"),
            other => format!("{block}: {other}"),
        };
        Failure { code, message }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_errors_exit_one() {
        let e = Error::Integration {
            t: 1.0,
            reason: "norm drift".into(),
        };
        assert_eq!(Failure::from(e).code, 1);
        let e = Error::Domain("bad".into());
        assert_eq!(Failure::from(e).code, 2);
    }
}
