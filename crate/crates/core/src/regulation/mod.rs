//! Encrypted feedback aggregation, alias-based monitoring, dishonesty fees
//! and anonymity corner cases.

mod aggregate;
mod fee;
mod feedback;
pub mod he;
mod leakage;
mod monitor;
mod protocol;

use thiserror::Error;

use crate::market::MarketError;

pub use aggregate::{aggregate_encrypted, feedback_split, EncryptedAggregate};
pub use fee::{default_u_max, dishonesty_fee, first_dominance_failure, FeeSchedule};
pub use feedback::{consistency_check, encode_feedback, FeedbackVector, Submission};
pub use he::{
    keygen, threshold_decrypt, Ciphertext, HeError, KeyMaterial, MockThresholdHe, ThresholdScheme,
};
pub use leakage::{leakage_flags, AnonymityCornerCases, CornerCase};
pub use monitor::{
    monitor_cycle, Alias, DishonestyReport, MonitorBinding, MonitorRules, MonitorState,
    SoftwareEntity,
};
pub use protocol::{Fault, ProtocolPath};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegulationError {
    #[error(transparent)]
    He(#[from] HeError),
    #[error("invalid feedback: {0}")]
    InvalidFeedback(String),
    #[error("unknown seller {0}")]
    UnknownSeller(usize),
    #[error("a feedback copy is missing")]
    MissingSubmission,
    #[error("aggregation failed: {0}")]
    Aggregate(String),
    #[error("alias {0} is not registered")]
    UnregisteredAlias(String),
    #[error("consensus failure in round {round}: buyers {buyers:?} disagree with buyer 0")]
    Consensus { round: u64, buyers: Vec<usize> },
    #[error("invalid fee schedule: {0}")]
    Fee(String),
    #[error("protocol setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Market(#[from] MarketError),
}
