use serde::{Deserialize, Serialize};

use super::{HarnessError, ScenarioConfig};
use crate::equilibrium::{
    classify_equilibrium, one_deviation_check, DeviationMode, DeviationSetup, DeviationVerdict,
    Regime, RegimeReport,
};
use crate::market::{SellerParams, Strategy};
use crate::pricing::{PricingRule, ReductionCase};
use crate::punishment::PunishmentPolicy;
use crate::rational::{serde_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationParams {
    pub n_buyers: usize,
    pub n_sellers: usize,
    pub pricing: PricingRule,
    pub punishment: PunishmentPolicy,
    pub sellers: Vec<SellerParams>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SellerBounds {
    pub seller: usize,
    #[serde(with = "serde_rational")]
    pub price: Rational,
    #[serde(with = "serde_rational")]
    pub hstar_threshold: Rational,
    #[serde(with = "serde_rational")]
    pub lstar_bound: Rational,
}

/// Regime classification of a scenario's sellers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub params: ClassificationParams,
    pub bounds: Vec<SellerBounds>,
    pub regime: Vec<Regime>,
    pub reduction: Option<ReductionCase>,
    /// Closed-form one-deviation check of the classified profile; `None`
    /// when some seller has no pure regime or pricing is not homogeneous.
    pub verified: Option<bool>,
    pub verdict: Option<DeviationVerdict>,
}

/// Classifies the scenario and checks the classified strategy profile.
///
/// The scenario's own seller strategies are ignored: each seller is given
/// the strategy of its regime.
pub fn classify_scenario(config: &ScenarioConfig) -> Result<ClassificationReport, HarnessError> {
    config.validate()?;
    let market = config.market_config();
    let report: RegimeReport = classify_equilibrium(
        &market,
        &config.sellers,
        &config.pricing,
        &config.punishment,
    )?;
    let regime: Vec<Regime> = report.sellers.iter().map(|s| s.regime).collect();
    let pure = regime
        .iter()
        .all(|r| matches!(r, Regime::HStar | Regime::LStar));
    let homogeneous = matches!(config.pricing, PricingRule::Homogeneous { .. });
    let verdict = if pure && homogeneous {
        let sellers = config
            .sellers
            .iter()
            .zip(&regime)
            .map(|(s, r)| SellerParams {
                strategy: if *r == Regime::HStar {
                    Strategy::AlwaysHigh
                } else {
                    Strategy::AlwaysLow
                },
                ..s.clone()
            })
            .collect();
        let setup = DeviationSetup {
            config: market.clone(),
            buyers: config.buyers.clone(),
            sellers,
            pricing: config.pricing.clone(),
            policy: config.punishment.clone(),
        };
        Some(one_deviation_check(&setup, DeviationMode::ClosedForm)?)
    } else {
        None
    };
    Ok(ClassificationReport {
        params: ClassificationParams {
            n_buyers: market.n_buyers,
            n_sellers: market.n_sellers,
            pricing: config.pricing.clone(),
            punishment: config.punishment.clone(),
            sellers: config.sellers.clone(),
        },
        bounds: report
            .sellers
            .iter()
            .map(|s| SellerBounds {
                seller: s.seller,
                price: s.price.clone(),
                hstar_threshold: s.hstar_threshold.clone(),
                lstar_bound: s.lstar_bound.clone(),
            })
            .collect(),
        regime,
        reduction: report.reduction,
        verified: verdict.as_ref().map(|v| v.holds),
        verdict,
    })
}
