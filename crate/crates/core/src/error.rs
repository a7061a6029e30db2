use thiserror::Error;

/// Errors raised by the characterization toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{n} qubits exceeds the supported maximum of {max}")]
    TooManyQubits { n: usize, max: usize },

    #[error("invalid Pauli string {text:?}: unexpected {found:?} at position {position}")]
    Parse {
        text: String,
        position: usize,
        found: char,
    },

    #[error("invalid Pauli string {text:?}: {reason}")]
    ParseShape { text: String, reason: String },

    #[error("code construction failed: {0}")]
    Construction(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("operator is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("Kraus operators are not complete (deviation {deviation:.3e})")]
    IncompleteKraus { deviation: f64 },

    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("measurement of generator {generator} selected an outcome with probability {probability:.3e}")]
    ImpossibleOutcome { generator: usize, probability: f64 },

    #[error("invalid state: eigenvalue {min_eigenvalue:.3e} below tolerance")]
    InvalidState { min_eigenvalue: f64 },

    #[error("incomplete data: missing preprocessing settings {missing:?}")]
    IncompleteData { missing: Vec<usize> },

    #[error("no accepted shots for setting {setting}")]
    NoAcceptedShots { setting: String },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, value: impl ToString, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            value: value.to_string(),
            reason: reason.into(),
        }
    }
}
