use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by model evaluation, propagation and the verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("unknown model `{name}`; registered models: {}", available.join(", "))]
    UnknownModel {
        name: String,
        available: Vec<String>,
    },

    #[error("matrix shape mismatch: expected {expected}x{expected}, found {rows}x{cols}")]
    Shape {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid evolution window [{t_start}, {t_end}]")]
    InvalidWindow { t_start: f64, t_end: f64 },

    #[error("step size underflow at s = {at} (step {step:e})")]
    StepUnderflow { at: f64, step: f64 },

    #[error("unitarity defect {defect:e} exceeds the accepted bound {bound:e}")]
    Unitarity { defect: f64, bound: f64 },

    #[error("infinite-time limit did not converge; finite-T ladder (T, p): {ladder:?}")]
    NonConvergence { ladder: Vec<(f64, f64)> },

    #[error("family `{family}` does not provide {missing}")]
    UnsupportedFamily {
        family: String,
        missing: &'static str,
    },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }
}
