use thiserror::Error;

/// Errors produced anywhere in the simulator.
///
/// `Domain` and `Config` describe bad inputs; `Integration` describes a run
/// whose numerics went wrong. The CLI maps the former to exit code 2 and the
/// latter to exit code 1.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration for `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("regime mismatch: estimator for {expected} called with noise classified as {actual}")]
    RegimeMismatch { expected: String, actual: String },

    #[error("step size {dt} violates step control; use dt <= {suggested_dt}")]
    StepControl { dt: f64, suggested_dt: f64 },

    #[error("integration failure at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("trajectory {index} (seed {seed:#018x}) failed: {source}")]
    Trajectory {
        index: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("time window needs {steps} steps, more than the limit of {max_steps}; loosen the tail tolerance or raise the limit")]
    WindowTooLarge { steps: u64, max_steps: u64 },

    #[error("adiabatic basis undefined: Hamiltonian is degenerate at t = {t}")]
    DegenerateBasis { t: f64 },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Integration { .. } => true,
            Error::Trajectory { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
