use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::bounds::hk_bounds;
use super::EquilibriumError;
use crate::framework::Quality;
use crate::market::{
    BuyerParams, MarketConfig, MarketState, OraclePath, PendingRound, SellerParams, Strategy,
};
use crate::pricing::PricingRule;
use crate::punishment::PunishmentPolicy;
use crate::rational::{int, pow, ratio, serde_rational, Rational};

/// A market profile to test: every seller's strategy is its candidate
/// equilibrium strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviationSetup {
    pub config: MarketConfig,
    pub buyers: Vec<BuyerParams>,
    pub sellers: Vec<SellerParams>,
    pub pricing: PricingRule,
    pub policy: PunishmentPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationMode {
    ClosedForm,
    Simulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    /// Give low quality to every current buyer this round.
    LowToAll,
    /// Give low quality to one current buyer this round.
    LowToOne,
    /// Give high quality to one current buyer this round.
    HighToOne,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deviation {
    pub seller: usize,
    pub kind: DeviationKind,
    #[serde(with = "serde_rational")]
    pub conform_value: Rational,
    #[serde(with = "serde_rational")]
    pub deviate_value: Rational,
    pub profitable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationVerdict {
    pub mode: DeviationMode,
    pub holds: bool,
    pub checked: Vec<Deviation>,
    pub violation: Option<Deviation>,
    /// Sellers that had no customer to deviate toward.
    pub without_customers: Vec<usize>,
    /// Rounds simulated after the deviation, in simulation mode.
    pub truncation: Option<u64>,
}

/// Discounted payoffs `(conform, deviate)` of an L* seller in an all-L*
/// market that considers giving one buyer high quality.
pub fn lstar_payoffs(
    policy: &PunishmentPolicy,
    p: &Rational,
    c: &Rational,
    sigma: &Rational,
    n_buyers: usize,
    n_sellers: usize,
) -> (Rational, Rational) {
    let one = Rational::one();
    let n_b = int(n_buyers as i64);
    let n_s = int(n_sellers as i64);
    let share = |future: Rational| p + &n_b * p * future / &n_s;
    let conform_local = share(sigma / (&one - sigma));
    let revisit = |alpha: usize| sigma * &n_b * p / (&one - pow(sigma, alpha + 1));
    match policy {
        PunishmentPolicy::GrimTrigger => (conform_local, p - c + sigma * &n_b * p),
        PunishmentPolicy::TitForTat => (conform_local, p - c + revisit(1)),
        PunishmentPolicy::Limited { alpha } => (conform_local, p - c + revisit(*alpha as usize)),
        PunishmentPolicy::Threshold { alpha, .. } => {
            let a = *alpha as usize;
            let conform = share(pow(sigma, a + 2) / (&one - pow(sigma, a + 1)));
            (conform, p - c + revisit(a))
        }
    }
}

/// Smallest `T` with `sigma^T * p * n_B / (1 - sigma) < tol`.
pub fn truncation_horizon(sigma: &Rational, p: &Rational, n_buyers: usize, tol: &Rational) -> u64 {
    let scale = p * int(n_buyers as i64) / (Rational::one() - sigma);
    let mut t = 0;
    let mut term = scale;
    while &term >= tol {
        term *= sigma;
        t += 1;
    }
    t
}

/// Default tail tolerance of simulation mode.
pub fn default_tolerance() -> Rational {
    ratio(1, 1_000_000_000)
}

fn homogeneous_price(setup: &DeviationSetup) -> Result<Rational, EquilibriumError> {
    match &setup.pricing {
        PricingRule::Homogeneous { p } => Ok(p.clone()),
        _ => Err(EquilibriumError::Unsupported(
            "deviation checks need homogeneous pricing".into(),
        )),
    }
}

fn deviation(
    seller: usize,
    kind: DeviationKind,
    conform: Rational,
    deviate: Rational,
    margin: &Rational,
) -> Deviation {
    let profitable = &deviate - &conform > *margin;
    Deviation {
        seller,
        kind,
        conform_value: conform,
        deviate_value: deviate,
        profitable,
    }
}

fn closed_form_seller(
    setup: &DeviationSetup,
    seller: usize,
    p: &Rational,
) -> Result<Option<Vec<Deviation>>, EquilibriumError> {
    let one = Rational::one();
    let params = &setup.sellers[seller];
    let (sigma, c) = (&params.sigma, &params.cost);
    let zero = Rational::zero();
    let n_b = setup.config.n_buyers;
    match &params.strategy {
        Strategy::AlwaysHigh => {
            let conform = (p - c) / (&one - sigma);
            Ok(Some(vec![deviation(
                seller,
                DeviationKind::LowToAll,
                conform,
                p.clone(),
                &zero,
            )]))
        }
        Strategy::AlwaysLow => {
            let competitor = setup
                .sellers
                .iter()
                .enumerate()
                .any(|(s, x)| s != seller && x.strategy == Strategy::AlwaysHigh);
            if competitor {
                // Buyers stay with high-quality sellers; nobody to deviate toward.
                return Ok(None);
            }
            let (conform, deviate) =
                lstar_payoffs(&setup.policy, p, c, sigma, n_b, setup.config.n_sellers);
            Ok(Some(vec![deviation(
                seller,
                DeviationKind::HighToOne,
                conform,
                deviate,
                &zero,
            )]))
        }
        Strategy::Periodic { k } => {
            hk_bounds(p, sigma, *k, n_b)?;
            let k = *k as usize;
            let s_k1 = pow(sigma, k + 1);
            let cycle = (&one / (&one - &s_k1))
                * ((p - c) * (&one - pow(sigma, k)) / (&one - sigma) + &s_k1 * p);
            let from_high = deviation(
                seller,
                DeviationKind::LowToAll,
                cycle.clone(),
                p.clone(),
                &zero,
            );
            let on_low = p + sigma * &cycle;
            let up = p - c + sigma * int(n_b as i64) * &cycle;
            let from_low = deviation(seller, DeviationKind::HighToOne, on_low, up, &zero);
            Ok(Some(vec![from_high, from_low]))
        }
        Strategy::Scripted { .. } => Err(EquilibriumError::Unsupported(
            "scripted strategies have no one-deviation analysis".into(),
        )),
    }
}

/// Checks whether any seller gains from a single-round quality deviation.
pub fn one_deviation_check(
    setup: &DeviationSetup,
    mode: DeviationMode,
) -> Result<DeviationVerdict, EquilibriumError> {
    let sellers: Vec<usize> = (0..setup.sellers.len()).collect();
    one_deviation_check_sellers(setup, &sellers, mode)
}

/// As [`one_deviation_check`], restricted to `sellers`.
pub fn one_deviation_check_sellers(
    setup: &DeviationSetup,
    sellers: &[usize],
    mode: DeviationMode,
) -> Result<DeviationVerdict, EquilibriumError> {
    let p = homogeneous_price(setup)?;
    // Validates the whole setup.
    MarketState::new(
        setup.config.clone(),
        setup.buyers.clone(),
        setup.sellers.clone(),
        setup.pricing.clone(),
        setup.policy.clone(),
    )?;
    let mut checked = Vec::new();
    let mut without_customers = Vec::new();
    let mut truncation = None;
    for &s in sellers {
        if s >= setup.sellers.len() {
            return Err(EquilibriumError::Invalid(format!("no seller {s}")));
        }
        let found = match mode {
            DeviationMode::ClosedForm => closed_form_seller(setup, s, &p)?,
            DeviationMode::Simulation => {
                let (found, t) = simulate_seller(setup, s, &p, &default_tolerance())?;
                truncation = Some(t);
                found
            }
        };
        match found {
            Some(devs) => checked.extend(devs),
            None => without_customers.push(s),
        }
    }
    let violation = checked.iter().find(|d| d.profitable).cloned();
    Ok(DeviationVerdict {
        mode,
        holds: violation.is_none(),
        checked,
        violation,
        without_customers,
        truncation,
    })
}

const MAX_SEEDS: u64 = 8;
const MIN_WARMUP: u64 = 3;

/// Seller `s`'s payoff in a pending round, in expectation over uniform ties.
fn expected_payoff(state: &MarketState, pending: &PendingRound, s: usize) -> Rational {
    let Some(price) = &pending.prices[s] else {
        return Rational::zero();
    };
    let cost = &state.sellers[s].params.cost;
    let mut total = Rational::zero();
    let margin = match state.sellers[s].params.strategy.quality_at(pending.t) {
        Quality::High => price - cost,
        Quality::Low => price.clone(),
    };
    for cands in pending.candidates.iter().flatten() {
        if cands.contains(&s) {
            total += &margin / int(cands.len() as i64);
        }
    }
    total
}

fn realized_payoff(state: &MarketState, pending: &PendingRound, s: usize) -> Rational {
    let cost = &state.sellers[s].params.cost;
    pending
        .purchases
        .iter()
        .filter(|x| x.seller == s)
        .map(|x| match x.quality {
            Quality::High => &x.price - cost,
            Quality::Low => x.price.clone(),
        })
        .sum()
}

/// Discounted payoff of seller `s` from the pending round `d` on.
fn path_value(
    mut state: MarketState,
    pending: PendingRound,
    s: usize,
    rounds: u64,
) -> Result<Rational, EquilibriumError> {
    let sigma = state.sellers[s].params.sigma.clone();
    let mut value = realized_payoff(&state, &pending, s);
    let reports = pending.honest_reports();
    state.finish_round(pending, &reports, &mut OraclePath)?;
    let mut discount = Rational::one();
    for _ in 0..rounds {
        discount *= &sigma;
        let next = state.begin_round()?;
        value += &discount * expected_payoff(&state, &next, s);
        let reports = next.honest_reports();
        state.finish_round(next, &reports, &mut OraclePath)?;
    }
    Ok(value)
}

fn warmed_up(state: &MarketState, seller: usize, pending: &PendingRound) -> bool {
    if state.round() < MIN_WARMUP || !pending.purchases.iter().any(|x| x.seller == seller) {
        return false;
    }
    let xi = &state.config.xi;
    let highs: Vec<usize> = (0..state.sellers.len())
        .filter(|&s| state.sellers[s].params.strategy == Strategy::AlwaysHigh)
        .collect();
    if highs.is_empty() {
        // Buyers still exploring untried sellers have not settled yet.
        return state
            .buyers
            .iter()
            .all(|b| b.histories.iter().all(|h| h.has_transacted()));
    }
    // A high-quality competitor must already be visible to the market.
    highs
        .iter()
        .any(|&s| s != seller && &state.current_ratings()[s] > xi)
}

fn apply_deviation(pending: &mut PendingRound, seller: usize, kind: DeviationKind) -> bool {
    let mut changed = false;
    for x in pending.purchases.iter_mut().filter(|x| x.seller == seller) {
        let target = match kind {
            DeviationKind::LowToAll | DeviationKind::LowToOne => Quality::Low,
            DeviationKind::HighToOne => Quality::High,
        };
        if x.quality != target {
            x.quality = target;
            changed = true;
        }
        if kind != DeviationKind::LowToAll {
            break;
        }
    }
    changed
}

fn simulate_seller(
    setup: &DeviationSetup,
    seller: usize,
    p: &Rational,
    tol: &Rational,
) -> Result<(Option<Vec<Deviation>>, u64), EquilibriumError> {
    if !setup.policy.is_local() {
        return Err(EquilibriumError::Unsupported(
            "simulation mode covers local punishment only".into(),
        ));
    }
    if matches!(setup.sellers[seller].strategy, Strategy::Scripted { .. }) {
        return Err(EquilibriumError::Unsupported(
            "scripted strategies have no one-deviation analysis".into(),
        ));
    }
    let sigma = &setup.sellers[seller].sigma;
    let n_b = setup.config.n_buyers;
    let rounds = truncation_horizon(sigma, p, n_b, tol);
    let tail =
        int(2) * pow(sigma, rounds as usize) * p * int(n_b as i64) / (Rational::one() - sigma);
    let max_warmup = 4 * setup.config.n_sellers as u64 + 8;
    for attempt in 0..MAX_SEEDS {
        let mut config = setup.config.clone();
        config.rng_seed = setup.config.rng_seed.wrapping_add(attempt);
        config.horizon = max_warmup + rounds + 2;
        let mut state = MarketState::new(
            config,
            setup.buyers.clone(),
            setup.sellers.clone(),
            setup.pricing.clone(),
            setup.policy.clone(),
        )?;
        state.disable_store();
        while state.round() <= max_warmup {
            let pending = state.begin_round()?;
            if warmed_up(&state, seller, &pending) {
                let due = state.sellers[seller].params.strategy.quality_at(pending.t);
                let kinds: &[DeviationKind] = match due {
                    Quality::High => &[DeviationKind::LowToAll, DeviationKind::LowToOne],
                    Quality::Low => &[DeviationKind::HighToOne],
                };
                let conform = path_value(state.clone(), pending.clone(), seller, rounds)?;
                let mut devs = Vec::new();
                for &kind in kinds {
                    let mut deviated = pending.clone();
                    if !apply_deviation(&mut deviated, seller, kind) {
                        continue;
                    }
                    let value = path_value(state.clone(), deviated, seller, rounds)?;
                    devs.push(deviation(seller, kind, conform.clone(), value, &tail));
                }
                return Ok((Some(devs), rounds));
            }
            let reports = pending.honest_reports();
            state.finish_round(pending, &reports, &mut OraclePath)?;
        }
    }
    Ok((None, rounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::bounds::lstar_bound;

    fn setup(
        costs: &[Rational],
        strategies: &[Strategy],
        policy: PunishmentPolicy,
        sigma: Rational,
    ) -> DeviationSetup {
        let n = costs.len();
        DeviationSetup {
            config: MarketConfig {
                n_buyers: 3,
                n_sellers: n,
                xi: ratio(1, 2),
                tau: ratio(3, 5),
                tau_bar: ratio(1, 2),
                v_high: int(5),
                v_low: int(0),
                horizon: 10,
                rng_seed: 1,
            },
            buyers: vec![
                BuyerParams {
                    delta: ratio(4, 5),
                    theta: ratio(1, 2)
                };
                3
            ],
            sellers: costs
                .iter()
                .zip(strategies)
                .map(|(c, st)| SellerParams {
                    sigma: sigma.clone(),
                    cost: c.clone(),
                    strategy: st.clone(),
                })
                .collect(),
            pricing: PricingRule::Homogeneous { p: int(2) },
            policy,
        }
    }

    #[test]
    fn truncation_horizon_meets_tolerance() {
        let t = truncation_horizon(&ratio(1, 2), &int(1), 3, &default_tolerance());
        let tail = |t: u64| pow(&ratio(1, 2), t as usize) * int(3) / ratio(1, 2);
        assert!(tail(t) < default_tolerance());
        assert!(tail(t - 1) >= default_tolerance());
    }

    #[test]
    fn grim_all_high_cheap_cost_holds() {
        let s = setup(
            &vec![int(1); 3],
            &vec![Strategy::AlwaysHigh; 3],
            PunishmentPolicy::GrimTrigger,
            ratio(3, 5),
        );
        assert!(
            one_deviation_check(&s, DeviationMode::ClosedForm)
                .unwrap()
                .holds
        );
    }

    #[test]
    fn all_high_expensive_cost_fails() {
        let s = setup(
            &vec![ratio(3, 2); 3],
            &vec![Strategy::AlwaysHigh; 3],
            PunishmentPolicy::GrimTrigger,
            ratio(3, 5),
        );
        let v = one_deviation_check(&s, DeviationMode::ClosedForm).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violation.unwrap().kind, DeviationKind::LowToAll);
    }

    #[test]
    fn all_low_above_bound_holds() {
        let sigma = ratio(1, 2);
        let policy = PunishmentPolicy::Limited { alpha: 3 };
        let bound = lstar_bound(&policy, &int(2), &sigma, 3, 3);
        assert!(bound < int(2));
        let c = (&bound + int(2)) / int(2);
        let s = setup(
            &[c.clone(), c.clone(), c],
            &vec![Strategy::AlwaysLow; 3],
            policy,
            sigma,
        );
        assert!(
            one_deviation_check(&s, DeviationMode::ClosedForm)
                .unwrap()
                .holds
        );
        assert!(
            one_deviation_check(&s, DeviationMode::Simulation)
                .unwrap()
                .holds
        );
    }

    #[test]
    fn simulation_finds_high_deviation_when_cost_exceeds_margin() {
        let s = setup(
            &vec![ratio(3, 2); 3],
            &vec![Strategy::AlwaysHigh; 3],
            PunishmentPolicy::TitForTat,
            ratio(3, 5),
        );
        let v = one_deviation_check_sellers(&s, &[0], DeviationMode::Simulation).unwrap();
        assert!(!v.holds);
        assert!(v.truncation.unwrap() > 0);
    }

    #[test]
    fn simulation_confirms_high_star_below_margin() {
        let s = setup(
            &vec![ratio(1, 2); 3],
            &vec![Strategy::AlwaysHigh; 3],
            PunishmentPolicy::TitForTat,
            ratio(3, 5),
        );
        let v = one_deviation_check_sellers(&s, &[0], DeviationMode::Simulation).unwrap();
        assert!(v.holds, "{:?}", v.checked);
    }

    #[test]
    fn low_seller_among_high_sellers_has_no_customers() {
        let strategies = [
            Strategy::AlwaysHigh,
            Strategy::AlwaysHigh,
            Strategy::AlwaysLow,
        ];
        let s = setup(
            &[ratio(1, 2), ratio(1, 2), ratio(19, 10)],
            &strategies,
            PunishmentPolicy::TitForTat,
            ratio(3, 5),
        );
        let v = one_deviation_check_sellers(&s, &[2], DeviationMode::ClosedForm).unwrap();
        assert!(v.holds && v.without_customers == vec![2]);
    }

    #[test]
    fn periodic_never_sustained_and_threshold_sim_unsupported() {
        let s = setup(
            &vec![int(1); 3],
            &vec![Strategy::Periodic { k: 2 }; 3],
            PunishmentPolicy::TitForTat,
            ratio(3, 5),
        );
        assert!(
            !one_deviation_check(&s, DeviationMode::ClosedForm)
                .unwrap()
                .holds
        );
        let th = setup(
            &vec![int(1); 3],
            &vec![Strategy::AlwaysHigh; 3],
            PunishmentPolicy::Threshold {
                threshold: None,
                alpha: 1,
            },
            ratio(3, 5),
        );
        assert!(matches!(
            one_deviation_check(&th, DeviationMode::Simulation),
            Err(EquilibriumError::Unsupported(_))
        ));
        let scripted = setup(
            &vec![int(1); 3],
            &vec![
                Strategy::Scripted {
                    qualities: vec![Quality::High]
                };
                3
            ],
            PunishmentPolicy::TitForTat,
            ratio(3, 5),
        );
        assert!(one_deviation_check(&scripted, DeviationMode::ClosedForm).is_err());
    }
}
