//! Pricing rules, the adaptive binary price state machine, the binary to
//! homogeneous reduction and the continuous-pricing seller comparator.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{serde_rational, Rational};

/// Price category of a seller under non-adaptive binary pricing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceClass {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PricingRule {
    Homogeneous {
        #[serde(with = "serde_rational")]
        p: Rational,
    },
    BinaryNonAdaptive {
        #[serde(with = "serde_rational")]
        p_high: Rational,
        #[serde(with = "serde_rational")]
        p_low: Rational,
        #[serde(with = "serde_rational")]
        epsilon: Rational,
        assignment: Vec<PriceClass>,
    },
    BinaryAdaptive {
        #[serde(with = "serde_rational")]
        p_high: Rational,
        #[serde(with = "serde_rational")]
        p_low: Rational,
        #[serde(with = "serde_rational")]
        epsilon: Rational,
    },
    Continuous {
        #[serde(with = "serde_rational")]
        p_high: Rational,
        #[serde(with = "serde_rational")]
        p_low: Rational,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PricingError {
    #[error("seller {0} is isolated and not for sale")]
    NotForSale(usize),
    #[error("seller {0} has no price class")]
    UnknownSeller(usize),
    #[error("invalid pricing parameters: {0}")]
    Invalid(String),
    #[error("strategy length {k} exceeds customer count {customers}")]
    TooManyHighSales { k: u32, customers: u32 },
}

/// Per-seller phase under adaptive binary pricing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum AdaptiveSellerPriceState {
    HighPrice,
    Isolated {
        rounds_left: u32,
        #[serde(with = "serde_rational")]
        saved_q: Rational,
    },
    LowPrice,
}

/// Result of one adaptive step. `reset` carries the rating a seller
/// rejoins with when isolation expires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptiveStep {
    pub state: AdaptiveSellerPriceState,
    pub reset: Option<Rational>,
}

impl PricingRule {
    /// `(p_H, p_L)` for the two-price and continuous rules.
    pub fn price_bounds(&self) -> Option<(&Rational, &Rational)> {
        match self {
            PricingRule::Homogeneous { .. } => None,
            PricingRule::BinaryNonAdaptive { p_high, p_low, .. }
            | PricingRule::BinaryAdaptive { p_high, p_low, .. }
            | PricingRule::Continuous { p_high, p_low } => Some((p_high, p_low)),
        }
    }

    /// Checks the parameter chain of the rule against valuations and costs.
    pub fn validate(
        &self,
        v_high: &Rational,
        v_low: &Rational,
        costs: &[Rational],
    ) -> Result<(), PricingError> {
        let zero = Rational::zero();
        let invalid = |m: String| Err(PricingError::Invalid(m));
        match self {
            PricingRule::Homogeneous { p } => {
                if !v_low.is_zero() {
                    return invalid(
                        "homogeneous pricing values low quality at 0 (v_low must be 0)".into(),
                    );
                }
                if !(v_high > p) {
                    return invalid("homogeneous pricing needs v > p".into());
                }
                for (s, c) in costs.iter().enumerate() {
                    if !(p > c && c > &zero) {
                        return invalid(format!("seller {s}: homogeneous pricing needs p > c > 0"));
                    }
                }
            }
            PricingRule::BinaryNonAdaptive { p_high, p_low, .. }
            | PricingRule::BinaryAdaptive { p_high, p_low, .. }
            | PricingRule::Continuous { p_high, p_low } => {
                for (s, c) in costs.iter().enumerate() {
                    let chain = [
                        p_high.clone(),
                        p_high - c,
                        p_low.clone(),
                        p_low - c,
                        zero.clone(),
                    ];
                    if !chain.windows(2).all(|w| w[0] > w[1]) {
                        return invalid(format!(
                            "seller {s}: need p_high > p_high - c > p_low > p_low - c > 0"
                        ));
                    }
                }
                let utilities = [
                    v_high - p_low,
                    v_high - p_high,
                    v_low - p_low,
                    zero.clone(),
                    v_low - p_high,
                ];
                if !utilities.windows(2).all(|w| w[0] > w[1]) {
                    return invalid("need v_high - p_low > v_high - p_high > v_low - p_low > 0 > v_low - p_high".into());
                }
            }
        }
        match self {
            PricingRule::BinaryNonAdaptive {
                epsilon,
                assignment,
                ..
            } => {
                check_epsilon(epsilon)?;
                if assignment.len() != costs.len() {
                    return invalid(format!(
                        "assignment lists {} sellers, market has {}",
                        assignment.len(),
                        costs.len()
                    ));
                }
            }
            PricingRule::BinaryAdaptive { epsilon, .. } => check_epsilon(epsilon)?,
            _ => {}
        }
        Ok(())
    }
}

fn check_epsilon(epsilon: &Rational) -> Result<(), PricingError> {
    if epsilon.is_positive() && epsilon < &Rational::one() {
        Ok(())
    } else {
        Err(PricingError::Invalid("epsilon must lie in (0, 1)".into()))
    }
}

/// Price charged by `seller` in a round where its rating is `q`.
///
/// `adaptive` is the seller's phase, consulted only for the adaptive rule.
pub fn price_of(
    rule: &PricingRule,
    seller: usize,
    q: &Rational,
    adaptive: Option<&AdaptiveSellerPriceState>,
) -> Result<Rational, PricingError> {
    match rule {
        PricingRule::Homogeneous { p } => Ok(p.clone()),
        PricingRule::BinaryNonAdaptive {
            p_high,
            p_low,
            assignment,
            ..
        } => match assignment.get(seller) {
            Some(PriceClass::High) => Ok(p_high.clone()),
            Some(PriceClass::Low) => Ok(p_low.clone()),
            None => Err(PricingError::UnknownSeller(seller)),
        },
        PricingRule::BinaryAdaptive { p_high, p_low, .. } => match adaptive {
            Some(AdaptiveSellerPriceState::HighPrice) | None => Ok(p_high.clone()),
            Some(AdaptiveSellerPriceState::LowPrice) => Ok(p_low.clone()),
            Some(AdaptiveSellerPriceState::Isolated { .. }) => {
                Err(PricingError::NotForSale(seller))
            }
        },
        PricingRule::Continuous { p_high, p_low } => Ok(p_low + (p_high - p_low) * q),
    }
}

/// `(p_H - p_L) / (v_H - v_L)`.
pub fn beta(p_high: &Rational, p_low: &Rational, v_high: &Rational, v_low: &Rational) -> Rational {
    (p_high - p_low) / (v_high - v_low)
}

/// Advances one seller's adaptive phase given its freshly published rating.
///
/// A high-price seller rated below `p_H / v_H`, or a low-price seller rated
/// below `epsilon`, is isolated for `alpha` rounds. On expiry it charges
/// `p_L` and its rating restarts at `max(epsilon, saved_q)`. A low-price
/// seller rated at least `1 - beta` is upgraded.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_step(
    state: &AdaptiveSellerPriceState,
    q: &Rational,
    p_high: &Rational,
    p_low: &Rational,
    v_high: &Rational,
    v_low: &Rational,
    epsilon: &Rational,
    alpha: u32,
) -> AdaptiveStep {
    let isolate = || AdaptiveStep {
        state: AdaptiveSellerPriceState::Isolated {
            rounds_left: alpha,
            saved_q: q.clone(),
        },
        reset: None,
    };
    let stay = |s: AdaptiveSellerPriceState| AdaptiveStep {
        state: s,
        reset: None,
    };
    match state {
        AdaptiveSellerPriceState::HighPrice => {
            if q < &(p_high / v_high) {
                isolate()
            } else {
                stay(AdaptiveSellerPriceState::HighPrice)
            }
        }
        AdaptiveSellerPriceState::Isolated {
            rounds_left,
            saved_q,
        } => {
            if *rounds_left > 1 {
                stay(AdaptiveSellerPriceState::Isolated {
                    rounds_left: rounds_left - 1,
                    saved_q: saved_q.clone(),
                })
            } else {
                let reset = if saved_q > epsilon {
                    saved_q.clone()
                } else {
                    epsilon.clone()
                };
                AdaptiveStep {
                    state: AdaptiveSellerPriceState::LowPrice,
                    reset: Some(reset),
                }
            }
        }
        AdaptiveSellerPriceState::LowPrice => {
            if q >= &(Rational::one() - beta(p_high, p_low, v_high, v_low)) {
                stay(AdaptiveSellerPriceState::HighPrice)
            } else if q < epsilon {
                isolate()
            } else {
                stay(AdaptiveSellerPriceState::LowPrice)
            }
        }
    }
}

/// What a seller can sustain, as computed by the equilibrium analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sustainability {
    /// Highest per-round buyer utility over the seller's sustainable
    /// strategies, or `None` if none is sustainable.
    pub max_utility: Option<Rational>,
    /// Whether some sustainable strategy keeps the rating above the
    /// high-price isolation threshold.
    pub avoids_isolation: bool,
}

impl Sustainability {
    pub fn sustains(&self, level: &Rational) -> bool {
        self.max_utility.as_ref().is_some_and(|u| u >= level)
    }
}

/// Which reduction applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionCase {
    /// A low-price seller sustains the utility buyers expect from a fresh high-price seller.
    LowSellersSustain,
    /// Only high-price sellers sustain at least `v_L - p_L`.
    HighSellersSustain,
    /// No high-price seller sustains `v_L - p_L`.
    FallBackToLow,
    /// Some seller avoids isolation under adaptive pricing.
    AvoidsIsolation,
    /// Nobody avoids isolation under adaptive pricing.
    NobodyAvoidsIsolation,
}

/// A homogeneous market obtained from a binary one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomogeneousInstance {
    pub sellers: Vec<usize>,
    pub p: Rational,
    pub case: ReductionCase,
    /// Sellers buyers pick from uniformly in round 1, when the reduction
    /// fixes that pool.
    pub first_round_pool: Option<Vec<usize>>,
}

pub fn binary_reduction(
    rule: &PricingRule,
    sustainability: &[Sustainability],
    xi: &Rational,
    v_high: &Rational,
    v_low: &Rational,
) -> Result<HomogeneousInstance, PricingError> {
    match rule {
        PricingRule::BinaryNonAdaptive {
            p_high,
            p_low,
            assignment,
            ..
        } => {
            if assignment.len() != sustainability.len() {
                return Err(PricingError::Invalid(
                    "one sustainability entry per seller required".into(),
                ));
            }
            let class = |c: PriceClass| -> Vec<usize> {
                (0..assignment.len())
                    .filter(|&s| assignment[s] == c)
                    .collect()
            };
            let (low, high) = (class(PriceClass::Low), class(PriceClass::High));
            let fresh_high = xi * v_high + (Rational::one() - xi) * v_low - p_high;
            let floor = v_low - p_low;
            let (sellers, p, case) = if low.iter().any(|&s| sustainability[s].sustains(&fresh_high))
            {
                (low.clone(), p_low.clone(), ReductionCase::LowSellersSustain)
            } else if high.iter().any(|&s| sustainability[s].sustains(&floor)) {
                (high, p_high.clone(), ReductionCase::HighSellersSustain)
            } else {
                (low.clone(), p_low.clone(), ReductionCase::FallBackToLow)
            };
            Ok(HomogeneousInstance {
                sellers,
                p,
                case,
                first_round_pool: Some(low),
            })
        }
        PricingRule::BinaryAdaptive { p_high, p_low, .. } => {
            let avoiders: Vec<usize> = (0..sustainability.len())
                .filter(|&s| sustainability[s].avoids_isolation)
                .collect();
            if avoiders.is_empty() {
                Ok(HomogeneousInstance {
                    sellers: (0..sustainability.len()).collect(),
                    p: p_low.clone(),
                    case: ReductionCase::NobodyAvoidsIsolation,
                    first_round_pool: None,
                })
            } else {
                Ok(HomogeneousInstance {
                    sellers: avoiders,
                    p: p_high.clone(),
                    case: ReductionCase::AvoidsIsolation,
                    first_round_pool: None,
                })
            }
        }
        _ => Err(PricingError::Invalid(
            "binary reduction needs a binary pricing rule".into(),
        )),
    }
}

/// Outcome of comparing two sellers under continuous pricing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    First,
    Second,
    Indifferent,
}

/// Which of two sellers a buyer of type `theta` prefers under continuous
/// pricing, given own histories `phi1`, `phi2` and ratings `eps1`, `eps2`.
/// Exact ties between the two sides go to the higher-rated seller.
pub fn compare_sellers_continuous(
    theta: &Rational,
    phi1: &Rational,
    phi2: &Rational,
    eps1: &Rational,
    eps2: &Rational,
    beta: &Rational,
) -> Preference {
    if eps1 == eps2 {
        return match phi1.cmp(phi2) {
            std::cmp::Ordering::Greater => Preference::First,
            std::cmp::Ordering::Less => Preference::Second,
            std::cmp::Ordering::Equal => Preference::Indifferent,
        };
    }
    let lhs = Rational::one() - beta;
    let rhs = theta * (Rational::one() - (phi1 - phi2) / (eps1 - eps2));
    if eps1 > eps2 {
        if lhs >= rhs {
            Preference::First
        } else {
            Preference::Second
        }
    } else if lhs < rhs {
        Preference::First
    } else {
        Preference::Second
    }
}

/// A seller's recent history, for the expected-customer table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryClass {
    /// Plays H* this round; history does not matter.
    AlwaysH,
    /// Played H* so far, now gives high to `k` of its buyers.
    WasHStar,
    /// Did not play H* so far, now gives high to `k` of its buyers.
    NotHStar,
}

/// Expected customers next round when exactly one other seller plays H*.
pub fn expected_customers(
    history: HistoryClass,
    k: u32,
    customers: u32,
    beta: &Rational,
    n_buyers: u32,
) -> Result<Rational, PricingError> {
    if k > customers {
        return Err(PricingError::TooManyHighSales { k, customers });
    }
    let r = |n: i64| Rational::from_integer(n.into());
    Ok(match history {
        HistoryClass::AlwaysH => r(customers as i64),
        HistoryClass::WasHStar => beta * r(n_buyers as i64 + k as i64 - customers as i64),
        HistoryClass::NotHStar => r(k as i64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn continuous_price_interpolates() {
        let rule = PricingRule::Continuous {
            p_high: int(2),
            p_low: int(1),
        };
        assert_eq!(price_of(&rule, 0, &int(0), None).unwrap(), int(1));
        assert_eq!(price_of(&rule, 0, &int(1), None).unwrap(), int(2));
        assert_eq!(price_of(&rule, 0, &ratio(2, 5), None).unwrap(), ratio(7, 5));
        let flat = PricingRule::Homogeneous { p: int(2) };
        assert_eq!(price_of(&flat, 3, &ratio(1, 7), None).unwrap(), int(2));
    }

    #[test]
    fn isolated_seller_has_no_price() {
        let rule = PricingRule::BinaryAdaptive {
            p_high: int(2),
            p_low: int(1),
            epsilon: ratio(1, 20),
        };
        let iso = AdaptiveSellerPriceState::Isolated {
            rounds_left: 1,
            saved_q: ratio(3, 10),
        };
        assert_eq!(
            price_of(&rule, 1, &int(0), Some(&iso)),
            Err(PricingError::NotForSale(1))
        );
    }

    fn step(state: &AdaptiveSellerPriceState, q: Rational, alpha: u32) -> AdaptiveStep {
        adaptive_step(
            state,
            &q,
            &int(2),
            &int(1),
            &int(5),
            &int(1),
            &ratio(1, 20),
            alpha,
        )
    }

    #[test]
    fn adaptive_machine_transitions() {
        let s = step(&AdaptiveSellerPriceState::HighPrice, ratio(3, 10), 2);
        assert_eq!(
            s.state,
            AdaptiveSellerPriceState::Isolated {
                rounds_left: 2,
                saved_q: ratio(3, 10)
            }
        );
        let s = step(
            &AdaptiveSellerPriceState::Isolated {
                rounds_left: 1,
                saved_q: ratio(3, 10),
            },
            int(0),
            2,
        );
        assert_eq!(s.state, AdaptiveSellerPriceState::LowPrice);
        assert_eq!(s.reset, Some(ratio(3, 10)));
        let s = step(
            &AdaptiveSellerPriceState::Isolated {
                rounds_left: 1,
                saved_q: ratio(1, 100),
            },
            int(0),
            2,
        );
        assert_eq!(s.reset, Some(ratio(1, 20)));
        // 1 - (2 - 1) / (5 - 1) = 3/4
        assert_eq!(
            step(&AdaptiveSellerPriceState::LowPrice, ratio(4, 5), 2).state,
            AdaptiveSellerPriceState::HighPrice
        );
        assert_eq!(
            step(&AdaptiveSellerPriceState::LowPrice, ratio(3, 4), 2).state,
            AdaptiveSellerPriceState::HighPrice
        );
        assert_eq!(
            step(&AdaptiveSellerPriceState::LowPrice, ratio(1, 2), 2).state,
            AdaptiveSellerPriceState::LowPrice
        );
        assert_eq!(
            step(&AdaptiveSellerPriceState::HighPrice, ratio(2, 5), 2).state,
            AdaptiveSellerPriceState::HighPrice
        );
    }

    #[test]
    fn isolation_lasts_alpha_steps() {
        for alpha in 1..6 {
            let mut state = step(&AdaptiveSellerPriceState::HighPrice, int(0), alpha).state;
            let mut isolated = 1;
            loop {
                let next = step(&state, int(0), alpha);
                if next.reset.is_some() {
                    break;
                }
                isolated += 1;
                state = next.state;
            }
            assert_eq!(isolated, alpha);
        }
    }

    #[test]
    fn validation_chain() {
        let rule = PricingRule::Continuous {
            p_high: int(2),
            p_low: int(1),
        };
        assert!(rule.validate(&int(5), &ratio(3, 2), &[ratio(1, 2)]).is_ok());
        assert!(rule.validate(&int(5), &ratio(3, 2), &[int(1)]).is_err());
        assert!(rule.validate(&int(5), &int(3), &[ratio(1, 2)]).is_err());
        let homog = PricingRule::Homogeneous { p: int(2) };
        assert!(homog.validate(&int(5), &int(0), &[int(1)]).is_ok());
        assert!(homog.validate(&int(5), &int(0), &[int(2)]).is_err());
    }

    #[test]
    fn continuous_comparator_cases() {
        let half = ratio(1, 2);
        assert_eq!(
            compare_sellers_continuous(
                &half,
                &int(1),
                &ratio(1, 2),
                &ratio(1, 2),
                &ratio(1, 2),
                &half
            ),
            Preference::First
        );
        assert_eq!(
            compare_sellers_continuous(
                &half,
                &int(1),
                &ratio(9, 10),
                &int(1),
                &ratio(4, 5),
                &ratio(3, 5)
            ),
            Preference::First
        );
        assert_eq!(
            compare_sellers_continuous(
                &half,
                &int(1),
                &int(1),
                &int(1),
                &ratio(4, 5),
                &ratio(99, 100)
            ),
            Preference::Second
        );
        // Mirrored order gives the mirrored answer.
        assert_eq!(
            compare_sellers_continuous(
                &half,
                &ratio(9, 10),
                &int(1),
                &ratio(4, 5),
                &int(1),
                &ratio(3, 5)
            ),
            Preference::Second
        );
    }

    #[test]
    fn expected_customer_table() {
        assert_eq!(
            expected_customers(HistoryClass::AlwaysH, 0, 4, &ratio(1, 2), 6).unwrap(),
            int(4)
        );
        assert_eq!(
            expected_customers(HistoryClass::WasHStar, 2, 4, &ratio(1, 2), 6).unwrap(),
            int(2)
        );
        assert_eq!(
            expected_customers(HistoryClass::NotHStar, 3, 4, &ratio(1, 2), 6).unwrap(),
            int(3)
        );
        assert!(expected_customers(HistoryClass::NotHStar, 5, 4, &ratio(1, 2), 6).is_err());
    }

    fn sus(u: Option<Rational>) -> Sustainability {
        Sustainability {
            max_utility: u,
            avoids_isolation: false,
        }
    }

    #[test]
    fn non_adaptive_reduction_rows() {
        use PriceClass::*;
        let rule = PricingRule::BinaryNonAdaptive {
            p_high: int(2),
            p_low: int(1),
            epsilon: ratio(1, 20),
            assignment: vec![High, High, Low, Low],
        };
        let (xi, vh, vl) = (ratio(1, 2), int(5), ratio(3, 2));
        // fresh high-price utility: 5/2 + 3/4 - 2 = 5/4
        let row1 = [sus(None), sus(None), sus(Some(int(4))), sus(None)];
        let r = binary_reduction(&rule, &row1, &xi, &vh, &vl).unwrap();
        assert_eq!(
            (r.sellers, r.p, r.case),
            (vec![2, 3], int(1), ReductionCase::LowSellersSustain)
        );
        let row2 = [sus(Some(int(3))), sus(None), sus(Some(int(1))), sus(None)];
        let r = binary_reduction(&rule, &row2, &xi, &vh, &vl).unwrap();
        assert_eq!(
            (r.sellers, r.p, r.case),
            (vec![0, 1], int(2), ReductionCase::HighSellersSustain)
        );
        let row3 = [sus(Some(int(0))), sus(None), sus(None), sus(None)];
        let r = binary_reduction(&rule, &row3, &xi, &vh, &vl).unwrap();
        assert_eq!(r.case, ReductionCase::FallBackToLow);
        assert_eq!(r.first_round_pool, Some(vec![2, 3]));
    }

    #[test]
    fn adaptive_reduction_rows() {
        let rule = PricingRule::BinaryAdaptive {
            p_high: int(2),
            p_low: int(1),
            epsilon: ratio(1, 20),
        };
        let none = vec![sus(None); 3];
        let r = binary_reduction(&rule, &none, &ratio(1, 2), &int(5), &int(1)).unwrap();
        assert_eq!((r.sellers, r.p), (vec![0, 1, 2], int(1)));
        let mut some = none.clone();
        some[1].avoids_isolation = true;
        let r = binary_reduction(&rule, &some, &ratio(1, 2), &int(5), &int(1)).unwrap();
        assert_eq!((r.sellers, r.p), (vec![1], int(2)));
    }
}
