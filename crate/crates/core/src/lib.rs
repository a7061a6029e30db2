//! Direct characterization of a single-qubit channel with a stabilizer-encoded probe.

pub mod analysis;
pub mod channels;
pub mod codes;
pub mod error;
pub mod pauli;
pub mod process;
pub mod protocol;
pub mod state;

pub use channels::{compose, theoretical_chi_ad, ChannelKind, ChannelSpec, QuantumChannel};
pub use codes::{StabilizerCode, Syndrome};
pub use error::{Error, Result};
pub use pauli::{Letter, PauliOperator};
pub use process::ProcessMatrix;
pub use state::{DensityMatrix, Outcome};
pub use protocol::{
    characterize, partial_characterize, Backend, CharacterizationConfig, CharacterizationResult, PreprocessingOp, Scenario,
    SyndromeHistogram,
};
