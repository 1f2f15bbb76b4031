use thiserror::Error;

/// Errors raised by grid construction, state handling and the integrators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QrelError {
    /// Shape or binding mismatch between fields and grids.
    #[error("structural error: {0}")]
    Structural(String),

    /// Invalid user-facing parameter (grid size, packet width, ...).
    #[error("configuration error in `{field}`: {reason}")]
    Configuration { field: String, reason: String },

    /// The state cannot support the requested operation (nodes, vanishing
    /// density, zero Fisher integral).
    #[error("degenerate state: {0}")]
    Degenerate(String),

    /// Argument outside the domain of a transformation law.
    #[error("domain error: {0}")]
    Domain(String),

    /// An integrator guard tripped; `step` is the last completed step.
    #[error("step-size error after step {step}: {reason}")]
    StepSize { step: usize, reason: String },

    /// The finite-difference oracle could not produce a trustworthy value.
    #[error("oracle precision error: {0}")]
    OraclePrecision(String),
}

impl QrelError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        QrelError::Configuration {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = QrelError> = std::result::Result<T, E>;
