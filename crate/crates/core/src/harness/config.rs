use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::market::{BuyerParams, MarketConfig, MarketError, MarketState, SellerParams};
use crate::pricing::PricingRule;
use crate::punishment::PunishmentPolicy;
use crate::rational::{ratio, serde_rational, Rational};
use crate::regulation::{default_u_max, dishonesty_fee, FeeSchedule};

/// Global market parameters of a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub n_buyers: usize,
    pub n_sellers: usize,
    #[serde(with = "serde_rational")]
    pub xi: Rational,
    #[serde(with = "serde_rational")]
    pub tau: Rational,
    #[serde(with = "serde_rational")]
    pub v_high: Rational,
    #[serde(with = "serde_rational")]
    pub v_low: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulationSection {
    /// Probability that a dishonest buyer is caught in a round.
    #[serde(with = "serde_rational")]
    pub nu: Rational,
    /// Lower bound of the per-round rating discount.
    #[serde(with = "serde_rational")]
    pub tau_bar: Rational,
    /// Whether monitors run alongside the protocol path.
    #[serde(default = "enabled")]
    pub monitoring: bool,
}

fn enabled() -> bool {
    true
}

impl Default for RegulationSection {
    fn default() -> Self {
        Self {
            nu: ratio(1, 10),
            tau_bar: ratio(1, 2),
            monitoring: true,
        }
    }
}

/// One scenario: a single JSON document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub market: MarketSection,
    pub buyers: Vec<BuyerParams>,
    pub sellers: Vec<SellerParams>,
    pub pricing: PricingRule,
    pub punishment: PunishmentPolicy,
    #[serde(default)]
    pub regulation: RegulationSection,
    pub rounds: u64,
    pub seed: u64,
}

fn config_error(field: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.into(),
        message: message.into(),
    }
}

/// Maps a market field name onto its location in the scenario document.
fn scenario_field(field: &str) -> String {
    match field {
        "n_buyers" | "n_sellers" | "xi" | "tau" | "v_high" | "v_low" => format!("market.{field}"),
        "tau_bar" => "regulation.tau_bar".into(),
        "horizon" => "rounds".into(),
        "rng_seed" => "seed".into(),
        other => other.into(),
    }
}

impl ScenarioConfig {
    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "config".into() } else { path };
            config_error(field, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn market_config(&self) -> MarketConfig {
        MarketConfig {
            n_buyers: self.market.n_buyers,
            n_sellers: self.market.n_sellers,
            xi: self.market.xi.clone(),
            tau: self.market.tau.clone(),
            tau_bar: self.regulation.tau_bar.clone(),
            v_high: self.market.v_high.clone(),
            v_low: self.market.v_low.clone(),
            horizon: self.rounds,
            rng_seed: self.seed,
        }
    }

    pub fn fee_schedule(&self) -> FeeSchedule {
        FeeSchedule {
            nu: self.regulation.nu.clone(),
            u_max: default_u_max(&self.pricing, &self.market.v_high),
        }
    }

    /// Builds the initial market state, reporting the first violated
    /// invariant by its location in the document.
    pub fn market_state(&self) -> Result<MarketState, HarnessError> {
        for (field, listed, declared) in [
            ("buyers", self.buyers.len(), self.market.n_buyers),
            ("sellers", self.sellers.len(), self.market.n_sellers),
        ] {
            if listed != declared && declared > 2 {
                return Err(config_error(
                    field,
                    format!("lists {listed} entries but market.n_{field} is {declared}"),
                ));
            }
        }
        MarketState::new(
            self.market_config(),
            self.buyers.clone(),
            self.sellers.clone(),
            self.pricing.clone(),
            self.punishment.clone(),
        )
        .map_err(|e| match e {
            MarketError::Invalid { field, message } => {
                config_error(scenario_field(&field), message)
            }
            other => HarnessError::Market(other),
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.market_state()?;
        dishonesty_fee(&self.fee_schedule())
            .map_err(|e| config_error("regulation.nu", e.to_string()))?;
        Ok(())
    }
}
