use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{invalid, MarketError};
use crate::framework::Quality;
use crate::rational::{pow, serde_rational, Rational};

/// A seller's quality policy, identical toward all buyers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    /// H*: always high.
    AlwaysHigh,
    /// L*: always low.
    AlwaysLow,
    /// (H^k L)*: `k` high rounds then one low round, by calendar round.
    Periodic { k: u32 },
    /// Quality for rounds 1, 2, ...; the last entry repeats.
    Scripted { qualities: Vec<Quality> },
}

impl Strategy {
    pub fn quality_at(&self, t: u64) -> Quality {
        match self {
            Strategy::AlwaysHigh => Quality::High,
            Strategy::AlwaysLow => Quality::Low,
            Strategy::Periodic { k } => {
                if (t - 1) % (*k as u64 + 1) < *k as u64 {
                    Quality::High
                } else {
                    Quality::Low
                }
            }
            Strategy::Scripted { qualities } => {
                let i = ((t - 1) as usize).min(qualities.len() - 1);
                qualities[i]
            }
        }
    }

    fn validate(&self, field: &str) -> Result<(), MarketError> {
        match self {
            Strategy::Periodic { k: 0 } => Err(invalid(field, "periodic strategy needs k >= 1")),
            Strategy::Scripted { qualities } if qualities.is_empty() => {
                Err(invalid(field, "scripted strategy needs at least one round"))
            }
            _ => Ok(()),
        }
    }
}

/// One-shot quality deviation injected for tests and deviation checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityOverride {
    pub seller: usize,
    pub round: u64,
    /// `None` applies to every buyer of the seller in that round.
    pub buyer: Option<usize>,
    pub quality: Quality,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuyerParams {
    #[serde(with = "serde_rational")]
    pub delta: Rational,
    #[serde(with = "serde_rational")]
    pub theta: Rational,
}

impl BuyerParams {
    pub fn validate(&self, index: usize, tau: &Rational) -> Result<(), MarketError> {
        if !(&self.delta > tau && self.delta < Rational::one()) {
            return Err(invalid(
                format!("buyers[{index}].delta"),
                "must lie in (tau, 1)",
            ));
        }
        if self.theta.is_negative() || self.theta > Rational::one() {
            return Err(invalid(
                format!("buyers[{index}].theta"),
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellerParams {
    #[serde(with = "serde_rational")]
    pub sigma: Rational,
    #[serde(with = "serde_rational")]
    pub cost: Rational,
    pub strategy: Strategy,
}

impl SellerParams {
    pub fn validate(&self, index: usize) -> Result<(), MarketError> {
        if !(self.sigma.is_positive() && self.sigma < Rational::one()) {
            return Err(invalid(
                format!("sellers[{index}].sigma"),
                "must lie in (0, 1)",
            ));
        }
        if !self.cost.is_positive() {
            return Err(invalid(
                format!("sellers[{index}].cost"),
                "must be positive",
            ));
        }
        self.strategy
            .validate(&format!("sellers[{index}].strategy"))
    }
}

/// Discounted high-quality frequency of one seller as seen by one buyer.
///
/// The numerator and denominator are kept as of the last purchase; rounds
/// without a purchase scale both by the same factor, so the ratio only
/// changes when a purchase is recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonalHistory {
    numer: Rational,
    denom: Rational,
    last_purchase: Option<u64>,
}

impl Default for PersonalHistory {
    fn default() -> Self {
        Self {
            numer: Rational::zero(),
            denom: Rational::zero(),
            last_purchase: None,
        }
    }
}

impl PersonalHistory {
    pub fn record(&mut self, round: u64, quality: Quality, delta: &Rational) {
        if let Some(last) = self.last_purchase {
            let scale = pow(delta, (round - last) as usize);
            self.numer *= &scale;
            self.denom *= &scale;
        }
        if quality == Quality::High {
            self.numer += Rational::one();
        }
        self.denom += Rational::one();
        self.last_purchase = Some(round);
    }

    pub fn has_transacted(&self) -> bool {
        self.last_purchase.is_some()
    }

    /// `h`, falling back to `xi_bar` for a seller never bought from.
    pub fn value(&self, xi_bar: &Rational) -> Rational {
        if self.has_transacted() {
            &self.numer / &self.denom
        } else {
            xi_bar.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuyerState {
    pub params: BuyerParams,
    pub histories: Vec<PersonalHistory>,
    /// Round of the latest high-quality delivery from each seller to this buyer.
    pub last_high: Vec<Option<u64>>,
    /// Every purchase: `(round, seller, quality received)`.
    pub purchases: Vec<(u64, usize, Quality)>,
}

impl BuyerState {
    pub fn new(params: BuyerParams, n_sellers: usize) -> Self {
        Self {
            params,
            histories: vec![PersonalHistory::default(); n_sellers],
            last_high: vec![None; n_sellers],
            purchases: Vec::new(),
        }
    }

    pub fn record(&mut self, round: u64, seller: usize, quality: Quality) {
        self.histories[seller].record(round, quality, &self.params.delta);
        if quality == Quality::High {
            self.last_high[seller] = Some(round);
        }
        self.purchases.push((round, seller, quality));
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SellerState {
    pub params: SellerParams,
}
