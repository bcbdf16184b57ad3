//! Closed-form equilibrium conditions, regime classification, one-deviation
//! checks and theorem sweeps.

mod bounds;
mod classify;
mod deviation;
mod sweep;

use thiserror::Error;

use crate::market::MarketError;

pub use bounds::{
    compare_punishments, compare_punishments_with, continuous_preference, hk_bounds, hk_identities,
    hstar_condition, lstar_bound, lstar_bound_with, HkIdentities, ThresholdBoundForm,
};
pub use classify::{
    classify_equilibrium, classify_equilibrium_with, sustainability, Regime, RegimeReport,
    SellerRegime, MAX_PERIOD,
};
pub use deviation::{
    default_tolerance, lstar_payoffs, one_deviation_check, one_deviation_check_sellers,
    truncation_horizon, Deviation, DeviationKind, DeviationMode, DeviationSetup, DeviationVerdict,
};
pub use sweep::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquilibriumError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Market(#[from] MarketError),
}
