//! Scenario configuration, end-to-end runs, report export, transcript
//! audits and the theorem verification driver.

mod classify;
mod config;
mod scenario;
mod theorems;
mod transcript;

use std::path::Path;

use thiserror::Error;

use crate::equilibrium::EquilibriumError;
use crate::market::MarketError;
use crate::regulation::RegulationError;

pub use classify::{classify_scenario, ClassificationParams, ClassificationReport, SellerBounds};
pub use config::{MarketSection, RegulationSection, ScenarioConfig};
pub use scenario::{
    export_report, load_report, run_scenario, FinalReport, ReportFormat, ResultBundle, RoundAudit,
    RoundRow, RunMode, CSV_HEADER, REPORT_SCHEMA_VERSION,
};
pub use theorems::{
    agreement_sweep, verify_theorems, AgreementGrid, AgreementSummary, GridSpec, TheoremReport,
    THEOREM_SCHEMA_VERSION,
};
pub use transcript::{audit_transcript, TranscriptAudit, TranscriptRoundAudit};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{field}: {message}")]
    Config { field: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("report: {0}")]
    Report(String),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Regulation(#[from] RegulationError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// Whether the error is a rejected configuration rather than a failed run.
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config { .. })
    }
}
