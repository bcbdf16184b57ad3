//! The buyer-seller model: histories, perceptions, seller selection, the
//! round loop and the plaintext rating engine.

mod agents;
mod payoff;
mod perception;
mod rating;
mod round;

use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{ratio, serde_rational, Rational};

pub use agents::{
    BuyerParams, BuyerState, PersonalHistory, QualityOverride, SellerParams, SellerState, Strategy,
};
pub use payoff::stage_payoffs;
pub use perception::{
    expected_utility, personal_history, personal_perception, select_seller, xi_bar, Selection,
};
pub use rating::{oracle_public_perception, public_perception, Epoch, RoundSummary};
pub use round::{
    FeedbackReport, MarketState, OraclePath, PendingRound, PublishInput, Published, Purchase,
    RatingPath, RoundOutcome,
};

/// Global market parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub n_buyers: usize,
    pub n_sellers: usize,
    /// Initial perception of unseen sellers.
    #[serde(with = "serde_rational")]
    pub xi: Rational,
    /// Lower bound of buyer discount factors.
    #[serde(with = "serde_rational")]
    pub tau: Rational,
    /// Lower bound of the per-round rating discount.
    #[serde(with = "serde_rational")]
    pub tau_bar: Rational,
    #[serde(with = "serde_rational")]
    pub v_high: Rational,
    #[serde(with = "serde_rational")]
    pub v_low: Rational,
    pub horizon: u64,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("round summaries are not contiguous: expected round {expected}, found {found}")]
    NonContiguous { expected: u64, found: u64 },
    #[error("history for round {requested} needs rounds through {needed}, have {have}")]
    HistoryGap {
        requested: u64,
        needed: u64,
        have: u64,
    },
    #[error("horizon of {0} rounds reached")]
    HorizonReached(u64),
    #[error("rating path failed: {0}")]
    Path(String),
}

pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> MarketError {
    MarketError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

impl MarketConfig {
    pub fn validate(&self) -> Result<(), MarketError> {
        if self.n_buyers <= 2 {
            return Err(invalid("n_buyers", "must be strictly greater than 2"));
        }
        if self.n_sellers <= 2 {
            return Err(invalid("n_sellers", "must be strictly greater than 2"));
        }
        if !(self.xi.is_positive() && self.xi < Rational::one()) {
            return Err(invalid("xi", "must lie in (0, 1)"));
        }
        if !(self.tau > ratio(1, 2) && self.tau < Rational::one()) {
            return Err(invalid("tau", "must lie in (1/2, 1)"));
        }
        if !(self.tau_bar.is_positive() && self.tau_bar < Rational::one()) {
            return Err(invalid("tau_bar", "must lie in (0, 1)"));
        }
        if self.v_low.is_negative() {
            return Err(invalid("v_low", "must be non-negative"));
        }
        if self.v_high <= self.v_low {
            return Err(invalid("v_high", "must exceed v_low"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least one round"));
        }
        Ok(())
    }
}
