use num_traits::One;
use serde::{Deserialize, Serialize};

use super::bounds::{hk_bounds, hstar_condition, lstar_bound_with, ThresholdBoundForm};
use super::EquilibriumError;
use crate::market::{MarketConfig, SellerParams};
use crate::pricing::{binary_reduction, PricingRule, ReductionCase, Sustainability};
use crate::punishment::{threshold_value, PunishmentPolicy};
use crate::rational::{int, pow, serde_rational, Rational};

/// Largest `k` of the periodic strategies (H^k L)* tried by the
/// sustainability analysis.
pub const MAX_PERIOD: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Always high quality.
    HStar,
    /// Always low quality.
    LStar,
    /// Neither H* nor L* is an equilibrium strategy.
    NoPureSgpe,
    /// The only seller able to sustain H* faces no competition; left open.
    MonopolyUnclassified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SellerRegime {
    pub seller: usize,
    pub regime: Regime,
    #[serde(with = "serde_rational")]
    pub price: Rational,
    /// `sigma * p`; H* needs a cost below it.
    #[serde(with = "serde_rational")]
    pub hstar_threshold: Rational,
    /// L* is dominant for a cost above it.
    #[serde(with = "serde_rational")]
    pub lstar_bound: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub policy: PunishmentPolicy,
    pub form: ThresholdBoundForm,
    /// Set when a binary market was reduced to a homogeneous one.
    pub reduction: Option<ReductionCase>,
    pub sellers: Vec<SellerRegime>,
}

impl RegimeReport {
    pub fn regime(&self, seller: usize) -> Regime {
        self.sellers[seller].regime
    }
}

/// Highest buyer utility over the seller's sustainable strategies in
/// {H*} plus {(H^k L)* : k <= [`MAX_PERIOD`]}, and whether one of them keeps
/// the seller's rating at or above `isolation_threshold`.
pub fn sustainability(
    params: &SellerParams,
    p: &Rational,
    n_buyers: usize,
    v_high: &Rational,
    v_low: &Rational,
    tau_bar: &Rational,
    isolation_threshold: &Rational,
) -> Result<Sustainability, EquilibriumError> {
    let one = Rational::one();
    let (sigma, c) = (&params.sigma, &params.cost);
    let mut best: Option<Rational> = None;
    let mut avoids = false;
    let mut consider = |utility: Rational, min_rating: Rational| {
        if best.as_ref().is_none_or(|b| &utility > b) {
            best = Some(utility);
        }
        avoids |= &min_rating >= isolation_threshold;
    };
    if hstar_condition(c, p, sigma) {
        consider(v_high - p, one.clone());
    }
    for k in 1..=MAX_PERIOD {
        let (upper, lower) = hk_bounds(p, sigma, k, n_buyers)?;
        if &lower < c && c < &upper {
            let kk = int(k as i64);
            let utility = (&kk * (v_high - p) + (v_low - p)) / (&kk + &one);
            let d = tau_bar;
            let k = k as usize;
            let min_rating = d * (&one - pow(d, k)) / (&one - pow(d, k + 1));
            consider(utility, min_rating);
        }
    }
    Ok(Sustainability {
        max_utility: best,
        avoids_isolation: avoids,
    })
}

fn validate(config: &MarketConfig, sellers: &[SellerParams]) -> Result<(), EquilibriumError> {
    config.validate()?;
    if sellers.len() != config.n_sellers {
        return Err(EquilibriumError::Invalid(format!(
            "{} sellers given for n_sellers = {}",
            sellers.len(),
            config.n_sellers
        )));
    }
    for (i, s) in sellers.iter().enumerate() {
        s.validate(i)?;
    }
    Ok(())
}

/// Regimes of a homogeneous market at price `p` among `members`.
fn classify_homogeneous(
    sellers: &[SellerParams],
    members: &[usize],
    p: &Rational,
    policy: &PunishmentPolicy,
    n_buyers: usize,
    n_sellers: usize,
    form: ThresholdBoundForm,
) -> Vec<SellerRegime> {
    let cheap: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&s| hstar_condition(&sellers[s].cost, p, &sellers[s].sigma))
        .collect();
    members
        .iter()
        .map(|&s| {
            let params = &sellers[s];
            let bound = lstar_bound_with(policy, p, &params.sigma, n_buyers, n_sellers, form);
            let above = params.cost > bound;
            let regime = match cheap.len() {
                0 if above => Regime::LStar,
                0 => Regime::NoPureSgpe,
                1 if cheap[0] == s => Regime::MonopolyUnclassified,
                1 if above => Regime::LStar,
                1 => Regime::MonopolyUnclassified,
                _ if cheap.contains(&s) => Regime::HStar,
                // Buyers settle on the high-quality sellers.
                _ => Regime::LStar,
            };
            SellerRegime {
                seller: s,
                regime,
                price: p.clone(),
                hstar_threshold: &params.sigma * p,
                lstar_bound: bound,
            }
        })
        .collect()
}

pub fn classify_equilibrium(
    config: &MarketConfig,
    sellers: &[SellerParams],
    pricing: &PricingRule,
    policy: &PunishmentPolicy,
) -> Result<RegimeReport, EquilibriumError> {
    classify_equilibrium_with(
        config,
        sellers,
        pricing,
        policy,
        ThresholdBoundForm::default(),
    )
}

pub fn classify_equilibrium_with(
    config: &MarketConfig,
    sellers: &[SellerParams],
    pricing: &PricingRule,
    policy: &PunishmentPolicy,
    form: ThresholdBoundForm,
) -> Result<RegimeReport, EquilibriumError> {
    validate(config, sellers)?;
    let costs: Vec<Rational> = sellers.iter().map(|s| s.cost.clone()).collect();
    pricing
        .validate(&config.v_high, &config.v_low, &costs)
        .map_err(|e| EquilibriumError::Invalid(e.to_string()))?;
    let n_b = config.n_buyers;
    let (mut regimes, reduction) = match pricing {
        PricingRule::Homogeneous { p } => {
            let all: Vec<usize> = (0..sellers.len()).collect();
            (
                classify_homogeneous(sellers, &all, p, policy, n_b, sellers.len(), form),
                None,
            )
        }
        PricingRule::BinaryNonAdaptive { .. } | PricingRule::BinaryAdaptive { .. } => {
            let mut table = Vec::with_capacity(sellers.len());
            for (s, params) in sellers.iter().enumerate() {
                let (p, threshold) = match pricing {
                    PricingRule::BinaryNonAdaptive {
                        p_high,
                        p_low,
                        assignment,
                        ..
                    } => {
                        let p = match assignment[s] {
                            crate::pricing::PriceClass::High => p_high,
                            crate::pricing::PriceClass::Low => p_low,
                        };
                        (
                            p.clone(),
                            threshold_value(pricing, s, &config.v_high)
                                .unwrap_or_else(Rational::one),
                        )
                    }
                    PricingRule::BinaryAdaptive { p_high, .. } => {
                        (p_high.clone(), p_high / &config.v_high)
                    }
                    _ => unreachable!(),
                };
                let (v_h, v_l) = (&config.v_high, &config.v_low);
                table.push(sustainability(
                    params,
                    &p,
                    n_b,
                    v_h,
                    v_l,
                    &config.tau_bar,
                    &threshold,
                )?);
            }
            let instance =
                binary_reduction(pricing, &table, &config.xi, &config.v_high, &config.v_low)
                    .map_err(|e| EquilibriumError::Invalid(e.to_string()))?;
            let mut regimes = classify_homogeneous(
                sellers,
                &instance.sellers,
                &instance.p,
                policy,
                n_b,
                instance.sellers.len(),
                form,
            );
            for s in 0..sellers.len() {
                if !instance.sellers.contains(&s) {
                    let params = &sellers[s];
                    regimes.push(SellerRegime {
                        seller: s,
                        regime: Regime::LStar,
                        price: instance.p.clone(),
                        hstar_threshold: &params.sigma * &instance.p,
                        lstar_bound: lstar_bound_with(
                            policy,
                            &instance.p,
                            &params.sigma,
                            n_b,
                            sellers.len(),
                            form,
                        ),
                    });
                }
            }
            (regimes, Some(instance.case))
        }
        PricingRule::Continuous { .. } => {
            return Err(EquilibriumError::Unsupported(
                "continuous pricing has no closed-form classification".into(),
            ))
        }
    };
    regimes.sort_by_key(|r| r.seller);
    Ok(RegimeReport {
        policy: policy.clone(),
        form,
        reduction,
        sellers: regimes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Strategy;
    use crate::pricing::PriceClass;
    use crate::rational::ratio;

    fn config(n_sellers: usize) -> MarketConfig {
        MarketConfig {
            n_buyers: 3,
            n_sellers,
            xi: ratio(1, 2),
            tau: ratio(3, 5),
            tau_bar: ratio(1, 2),
            v_high: int(5),
            v_low: int(0),
            horizon: 10,
            rng_seed: 0,
        }
    }

    fn sellers(costs: &[Rational], sigma: Rational) -> Vec<SellerParams> {
        costs
            .iter()
            .map(|c| SellerParams {
                sigma: sigma.clone(),
                cost: c.clone(),
                strategy: Strategy::AlwaysHigh,
            })
            .collect()
    }

    #[test]
    fn two_cheap_sellers_make_hstar() {
        let s = sellers(&[ratio(1, 2), ratio(1, 2), ratio(19, 10)], ratio(3, 5));
        let r = classify_equilibrium(
            &config(3),
            &s,
            &PricingRule::Homogeneous { p: int(2) },
            &PunishmentPolicy::TitForTat,
        )
        .unwrap();
        assert_eq!(r.regime(0), Regime::HStar);
        assert_eq!(r.regime(1), Regime::HStar);
        assert_eq!(r.regime(2), Regime::LStar);
    }

    #[test]
    fn no_cheap_sellers_split_by_bound() {
        // TFT, p = 1, sigma = 1/2, n = 3: the L* bound is 1 and c < p.
        let s = sellers(&vec![ratio(3, 4); 3], ratio(1, 2));
        let r = classify_equilibrium(
            &config(3),
            &s,
            &PricingRule::Homogeneous { p: int(1) },
            &PunishmentPolicy::TitForTat,
        )
        .unwrap();
        assert!(r.sellers.iter().all(|x| x.regime == Regime::NoPureSgpe));
        let grim = classify_equilibrium(
            &config(3),
            &s,
            &PricingRule::Homogeneous { p: int(1) },
            &PunishmentPolicy::GrimTrigger,
        )
        .unwrap();
        // Grim bound: 3/2 (1 - 2/3) = 1/2 < 3/4.
        assert!(grim.sellers.iter().all(|x| x.regime == Regime::LStar));
    }

    #[test]
    fn single_cheap_seller_is_unclassified() {
        let s = sellers(&[ratio(1, 4), ratio(9, 10), ratio(9, 10)], ratio(1, 2));
        let r = classify_equilibrium(
            &config(3),
            &s,
            &PricingRule::Homogeneous { p: int(1) },
            &PunishmentPolicy::GrimTrigger,
        )
        .unwrap();
        assert_eq!(r.regime(0), Regime::MonopolyUnclassified);
        assert_eq!(r.regime(1), Regime::LStar);
    }

    #[test]
    fn binary_reduction_classifies_low_class() {
        let s = sellers(&[ratio(1, 4), ratio(1, 4), ratio(1, 4)], ratio(1, 2));
        let pricing = PricingRule::BinaryNonAdaptive {
            p_high: int(3),
            p_low: int(1),
            epsilon: ratio(1, 20),
            assignment: vec![PriceClass::High, PriceClass::Low, PriceClass::Low],
        };
        let policy = PunishmentPolicy::Threshold {
            threshold: None,
            alpha: 1,
        };
        let binary = MarketConfig {
            v_high: int(10),
            v_low: int(2),
            ..config(3)
        };
        let r = classify_equilibrium(&binary, &s, &pricing, &policy).unwrap();
        assert_eq!(r.reduction, Some(ReductionCase::LowSellersSustain));
        assert_eq!(r.regime(0), Regime::LStar);
        assert_eq!(r.regime(1), Regime::HStar);
        assert_eq!(r.regime(2), Regime::HStar);
    }

    #[test]
    fn continuous_is_unsupported() {
        let s = sellers(&vec![ratio(1, 4); 3], ratio(1, 2));
        let pricing = PricingRule::Continuous {
            p_high: int(3),
            p_low: int(1),
        };
        let binary = MarketConfig {
            v_high: int(10),
            v_low: int(2),
            ..config(3)
        };
        assert!(matches!(
            classify_equilibrium(&binary, &s, &pricing, &PunishmentPolicy::TitForTat),
            Err(EquilibriumError::Unsupported(_))
        ));
    }

    #[test]
    fn periodic_never_sustainable() {
        let s = &sellers(&[ratio(3, 5)], ratio(1, 2))[0];
        let sus =
            sustainability(s, &int(1), 3, &int(5), &int(0), &ratio(1, 2), &ratio(1, 5)).unwrap();
        assert_eq!(sus.max_utility, None);
        assert!(!sus.avoids_isolation);
    }
}
