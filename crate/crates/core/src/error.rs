use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Operand dimensions do not fit the operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// Input lies outside the domain of the operation (non-hermitian, non-unitary, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A state failed its validity check.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Model definition is inconsistent (Kraus completeness, negative rates, ...).
    #[error("model error: {0}")]
    Model(String),

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("Fock truncation inadequate: {0}")]
    Truncation(String),

    #[error("undefined timescale: {0}")]
    UndefinedTimescale(String),
}

pub type Result<T> = std::result::Result<T, Error>;
